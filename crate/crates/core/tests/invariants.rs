mod common;

use num_complex::Complex64;
use platemem::cli::{format_float, parse_config};
use platemem::discretization::{assemble_mode_pencil, build_radial_grid, ModePencil};
use platemem::model::{AnnulusGeometry, PhysicalParams};
use platemem::semigroup::{energy, step_crank_nicolson, StateVector};
use platemem::spectral::eigenvalues;
use proptest::prelude::*;

use common::{energy_norm, generator, to_na, to_na_vec};

fn params() -> impl Strategy<Value = PhysicalParams> {
    (
        (0.2..5.0f64, 0.2..5.0f64, 0.2..5.0f64, 0.2..5.0f64, 0.2..5.0f64, 0.2..5.0f64),
        (0.0..3.0f64, 0.0..2.0f64, 0.0..2.0f64, 0.0..2.0f64, 0.1..5.0f64),
    )
        .prop_map(|((rho0, rho1, rho2, beta0, beta1, beta2), (mu, gamma, rho_damp, m_damp, kappa))| PhysicalParams {
            rho0,
            rho1,
            rho2,
            beta0,
            beta1,
            beta2,
            mu,
            gamma,
            rho_damp,
            m_damp,
            kappa,
        })
}

fn pencil(p: &PhysicalParams, mode: i32) -> ModePencil {
    assemble_mode_pencil(p, &build_radial_grid(&AnnulusGeometry::default(), 8, 8, mode).unwrap()).unwrap()
}

fn state(pc: &ModePencil, seed: &[f64]) -> StateVector {
    let n = pc.dim();
    let coefficients = (0..n)
        .map(|i| Complex64::new(seed[i % seed.len()] * (i as f64 + 1.0).sin(), seed[(i + 3) % seed.len()]))
        .collect();
    StateVector { mode: pc.mode, coefficients }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_rate_is_never_positive(p in params(), mode in 0..6i32, seed in prop::collection::vec(-1.0..1.0f64, 7)) {
        let pc = pencil(&p, mode);
        let x = state(&pc, &seed);
        let g = to_na(&pc.g).map(|v| nalgebra::Complex::new(v, 0.0));
        let l = generator(&pc).map(|v| nalgebra::Complex::new(v, 0.0));
        let v = to_na_vec(&x.coefficients);
        let rate = (v.adjoint() * &g * l * &v)[(0, 0)].re;
        let scale = (v.adjoint() * &g * &v)[(0, 0)].re * (l_norm(&pc) + 1.0);
        prop_assert!(rate <= 1e-10 * scale, "rate {rate:e}");
    }

    #[test]
    fn crank_nicolson_contracts(p in params(), mode in 0..6i32, dt in 1e-4..0.5f64, seed in prop::collection::vec(-1.0..1.0f64, 5)) {
        let pc = pencil(&p, mode);
        let x = state(&pc, &seed);
        let y = step_crank_nicolson(&pc, &x, dt).unwrap();
        let (before, after) = (energy_norm(&pc, &x.coefficients), energy_norm(&pc, &y.coefficients));
        prop_assert!(after <= before * (1.0 + 1e-10), "{before} -> {after}");
    }

    #[test]
    fn crank_nicolson_is_linear(p in params(), a in -2.0..2.0f64, s1 in prop::collection::vec(-1.0..1.0f64, 4), s2 in prop::collection::vec(-1.0..1.0f64, 6)) {
        let pc = pencil(&p, 1);
        let (x, y) = (state(&pc, &s1), state(&pc, &s2));
        let combo = StateVector {
            mode: 1,
            coefficients: x.coefficients.iter().zip(&y.coefficients).map(|(u, v)| u * a + v).collect(),
        };
        let (sx, sy, sc) = (
            step_crank_nicolson(&pc, &x, 0.01).unwrap(),
            step_crank_nicolson(&pc, &y, 0.01).unwrap(),
            step_crank_nicolson(&pc, &combo, 0.01).unwrap(),
        );
        let d: Vec<Complex64> = (0..pc.dim()).map(|i| sc.coefficients[i] - sx.coefficients[i] * a - sy.coefficients[i]).collect();
        prop_assert!(energy_norm(&pc, &d) <= 1e-10 * (1.0 + energy_norm(&pc, &combo.coefficients)));
    }

    #[test]
    fn energy_components_sum_to_total(p in params(), mode in 0..6i32, seed in prop::collection::vec(-1.0..1.0f64, 5)) {
        let pc = pencil(&p, mode);
        let e = energy(&pc, &state(&pc, &seed)).unwrap();
        let s: f64 = e.components.iter().sum();
        prop_assert!(e.components.iter().all(|&c| c >= 0.0));
        prop_assert!((s - e.total).abs() <= 1e-12 * e.total.max(1e-300));
    }

    #[test]
    fn spectrum_in_closed_left_half_plane(p in params(), mode in 0..6i32) {
        let s = eigenvalues(&pencil(&p, mode)).unwrap();
        prop_assert!(s.spectral_abscissa <= 1e-8 * s.max_abs());
        prop_assert!(s.zero_in_resolvent);
        prop_assert!(s.conjugate_pairing_error() <= 1e-7 * s.max_abs());
    }

    #[test]
    fn floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(format_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn configs_round_trip(p in params(), n in 8usize..40, lo in 0..3i32, extra in 0..3i32) {
        let text = format!(
            "rho0 = {}\nrho1 = {}\nrho2 = {}\nbeta0 = {}\nbeta1 = {}\nbeta2 = {}\nmu = {}\ngamma = {}\nrho = {}\nm = {}\nkappa = {}\nn_plate = {n}\nn_mem = {}\nmode_min = {lo}\nmode_max = {}\n",
            format_float(p.rho0), format_float(p.rho1), format_float(p.rho2), format_float(p.beta0),
            format_float(p.beta1), format_float(p.beta2), format_float(p.mu), format_float(p.gamma),
            format_float(p.rho_damp), format_float(p.m_damp), format_float(p.kappa), n + 1, lo + extra,
        );
        let c = parse_config(&text).unwrap();
        prop_assert_eq!(c.params, p);
        prop_assert_eq!((c.n_plate, c.n_mem), (n, n + 1));
        prop_assert_eq!(c.modes().len(), extra as usize + 1);
    }
}

fn l_norm(pc: &ModePencil) -> f64 {
    generator(pc).norm()
}
