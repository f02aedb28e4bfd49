mod common;

use num_complex::Complex64;
use platemem::discretization::{assemble_mode_pencil, build_radial_grid, ModePencil};
use platemem::linalg::matvec;
use platemem::model::{AnnulusGeometry, PhysicalParams};
use platemem::semigroup::*;

use common::{cells, energy_norm, propagate, to_na};

fn pencil(p: &PhysicalParams, res: usize, mode: i32) -> ModePencil {
    assemble_mode_pencil(p, &build_radial_grid(&AnnulusGeometry::default(), res, res, mode).unwrap()).unwrap()
}

fn diff(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[test]
fn small_pencils_fit_the_oracle_budget() {
    for (_, p, _) in cells() {
        assert!(pencil(&p, 8, 0).dim() <= 40);
    }
}

#[test]
fn padé_exponential_matches_nalgebra() {
    for (label, p, _) in cells() {
        let pc = pencil(&p, 8, 1);
        let ours = to_na(&matrix_exponential_reference(&pc, 0.7).unwrap());
        let theirs = (common::generator(&pc) * 0.7).exp();
        let err = (&ours - &theirs).norm() / theirs.norm();
        assert!(err < 1e-11, "{label}: {err:e}");
    }
}

#[test]
fn crank_nicolson_is_second_order() {
    let p = PhysicalParams::unit(1.0, 1.0, 0.0, 1.0);
    for mode in [0, 2] {
        let pc = pencil(&p, 8, mode);
        let x = make_initial_data(&pc, Profile::PlateBump).unwrap();
        let exact = propagate(&pc, &x.coefficients, 1.0);
        let err = |dt: f64| {
            let tr = simulate(&pc, &x, dt, 1.0).unwrap();
            energy_norm(&pc, &diff(&tr.final_state.coefficients, &exact))
        };
        let (e1, e2) = (err(1e-3), err(5e-4));
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() <= 0.2, "mode {mode}: errors {e1:e} {e2:e}, order {order}");
    }
}

#[test]
fn reference_propagator_applied_by_hand() {
    let pc = pencil(&PhysicalParams::unit(0.0, 1.0, 1.0, 1.0), 8, 3);
    let x = make_initial_data(&pc, Profile::ThermalPulse).unwrap();
    let e = matrix_exponential_reference(&pc, 0.25).unwrap();
    let ours = matvec(e.as_ref(), &x.coefficients);
    let theirs = propagate(&pc, &x.coefficients, 0.25);
    assert!(energy_norm(&pc, &diff(&ours, &theirs)) < 1e-10 * energy_norm(&pc, &theirs));
}

#[test]
fn energy_trace_for_every_cell() {
    for (label, p, g) in cells() {
        let pc = assemble_mode_pencil(&p, &build_radial_grid(&g, 16, 16, 1).unwrap()).unwrap();
        let x = make_initial_data(&pc, Profile::Rough(7)).unwrap();
        let tr = simulate(&pc, &x, 1e-3, 0.1).unwrap();
        assert_eq!(tr.len(), 101);
        assert!(tr.max_relative_residual() <= 1e-10, "{label}: {:e}", tr.max_relative_residual());
        assert!(tr.max_relative_increase() <= 1e-12, "{label}: {:e}", tr.max_relative_increase());
        for (k, b) in tr.breakdown.iter().enumerate() {
            let s: f64 = b.iter().sum();
            assert!((s - tr.energy[k]).abs() <= 1e-12 * tr.energy[0]);
        }
    }
}

#[test]
fn undamped_membrane_conserves_energy() {
    // With every damping switched off and no thermal coupling the scheme is
    // a Cayley transform of a skew operator.
    let p = PhysicalParams { mu: 0.0, ..PhysicalParams::unit(0.0, 0.0, 0.0, 0.0) };
    let grid = build_radial_grid(&AnnulusGeometry::default(), 16, 16, 0).unwrap();
    let pc = platemem::discretization::membrane_subpencil(&p, &grid).unwrap();
    let x = make_initial_data(&pc, Profile::MembraneBump).unwrap();
    let tr = simulate(&pc, &x, 1e-2, 2.0).unwrap();
    let drift = tr.energy.iter().map(|e| (e - tr.energy[0]).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-12 * tr.energy[0], "drift {drift:e}");
}

#[test]
fn strided_simulation_lands_on_the_same_state() {
    let pc = pencil(&PhysicalParams::unit(1.0, 0.0, 1.0, 1.0), 12, 2);
    let x = make_initial_data(&pc, Profile::PlateBump).unwrap();
    let full = simulate(&pc, &x, 2e-3, 0.4).unwrap();
    let strided = simulate_strided(&pc, &x, 2e-3, 0.4, 25).unwrap();
    assert_eq!(strided.len(), 9);
    assert_eq!(strided.stride, 25);
    for (k, e) in strided.energy.iter().enumerate() {
        assert!((e - full.energy[25 * k]).abs() <= 1e-10 * full.energy[0], "{k}: {e} vs {}", full.energy[25 * k]);
    }
    let gap = energy_norm(&pc, &diff(&strided.final_state.coefficients, &full.final_state.coefficients));
    assert!(gap <= 1e-10 * energy_norm(&pc, &x.coefficients));
}

#[test]
fn invalid_steps_are_rejected() {
    let pc = pencil(&PhysicalParams::default(), 8, 0);
    let x = make_initial_data(&pc, Profile::PlateBump).unwrap();
    assert!(simulate(&pc, &x, 0.0, 1.0).is_err());
    assert!(simulate(&pc, &x, -1e-3, 1.0).is_err());
    assert!(matrix_exponential_reference(&pc, -1.0).is_err());
    let wrong = StateVector { mode: 0, coefficients: vec![Complex64::new(0.0, 0.0); 3] };
    assert!(simulate(&pc, &wrong, 1e-3, 1.0).is_err());
}
