//! Mode Laplacians on ghost-extended grids, the ghost maps that realize the
//! boundary and transmission conditions, and the quadratic forms built from
//! them.
//!
//! Reduced unknowns: plate displacement (and velocity) use the first `N - 1`
//! plate nodes, the last node being slaved by the clamped condition; the
//! temperature uses all `N` plate nodes; the membrane uses all `Nm` nodes.

use std::f64::consts::PI;

use faer::Mat;

use super::grid::RadialGrid;
use crate::error::{Error, Result};
use crate::linalg::weighted_gram;

pub const GHOSTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Plate,
    Membrane,
}

/// Radii of the extended node set `[-2, -1, 0, .., n-1, n, n+1]`.
pub fn extended_nodes(grid: &RadialGrid, domain: Domain) -> Vec<f64> {
    let (nodes, h) = match domain {
        Domain::Plate => (&grid.plate_nodes, grid.h_plate),
        Domain::Membrane => (&grid.membrane_nodes, grid.h_mem),
    };
    let n = nodes.len() as i64;
    (-(GHOSTS as i64)..n + GHOSTS as i64).map(|k| nodes[0] + k as f64 * h).collect()
}

/// Flux-form centered stencil for `f'' + f'/r - n^2 f / r^2` on the
/// extended node set. Ghost rows are zero.
pub fn laplacian_mode(grid: &RadialGrid, domain: Domain) -> Mat<f64> {
    let (nodes, h) = match domain {
        Domain::Plate => (&grid.plate_nodes, grid.h_plate),
        Domain::Membrane => (&grid.membrane_nodes, grid.h_mem),
    };
    let n = nodes.len();
    let ne = n + 2 * GHOSTS;
    let n2 = grid.mode_sq();
    let mut l = Mat::zeros(ne, ne);
    for (i, &r) in nodes.iter().enumerate() {
        let k = i + GHOSTS;
        // On the membrane the first inner face sits at r = 0.
        let rm = (r - 0.5 * h).max(0.0);
        let rp = r + 0.5 * h;
        let c = 1.0 / (r * h * h);
        l[(k, k - 1)] = c * rm;
        l[(k, k + 1)] = c * rp;
        l[(k, k)] = -c * (rm + rp) - n2 / (r * r);
    }
    l
}

/// Ghost maps from reduced unknowns to extended node values.
#[derive(Debug, Clone)]
pub struct Closures {
    /// `(N+4) x (N-1)`: plate displacement from its free nodes.
    pub plate_u: Mat<f64>,
    /// `(N+4) x N`: temperature with Dirichlet at the interface and Robin at
    /// the outer circle.
    pub plate_theta: Mat<f64>,
    /// `(Nm+4) x (N-1+Nm)`: membrane values from `(u_free, v)`.
    pub membrane: Mat<f64>,
    /// Interface displacement as a row over the free plate nodes.
    pub interface_value: Vec<f64>,
    /// Outer trace `theta(r_outer) = c * theta_{N-1}`.
    pub outer_trace_coef: f64,
}

pub fn build_closures(grid: &RadialGrid, kappa: f64) -> Result<Closures> {
    let n = grid.n_plate();
    let nm = grid.n_mem();
    let nr = n - 1;
    let g = GHOSTS;

    // Clamped outer edge: u ~ c (R - r)^2 near R gives u_{N-1} = u_{N-2} / 9.
    // Zero slope at both ends by even reflection.
    let mut eu = Mat::zeros(n + 2 * g, nr);
    for i in 0..nr {
        eu[(i + g, i)] = 1.0;
    }
    eu[(n - 1 + g, nr - 1)] = 1.0 / 9.0;
    eu[(g - 1, 0)] = 1.0;
    eu[(g - 2, 1)] = 1.0;
    eu[(n + g, nr - 1)] = 1.0 / 9.0;
    eu[(n + g + 1, nr - 1)] = 1.0;

    // Zero-slope quadratic through u_0, u_1 evaluated at the interface.
    let mut interface_value = vec![0.0; nr];
    interface_value[0] = 9.0 / 8.0;
    interface_value[1] = -1.0 / 8.0;

    let a = 0.5 * kappa * grid.h_plate;
    if !(1.0 + a).is_normal() || !(1.0 + 3.0 * a).is_normal() {
        return Err(Error::SingularClosure { row: "robin condition at r_outer" });
    }
    let mut et = Mat::zeros(n + 2 * g, n);
    for i in 0..n {
        et[(i + g, i)] = 1.0;
    }
    et[(g - 1, 0)] = -1.0;
    et[(g - 2, 1)] = -1.0;
    et[(n + g, n - 1)] = (1.0 - a) / (1.0 + a);
    et[(n + g + 1, n - 2)] = (1.0 - 3.0 * a) / (1.0 + 3.0 * a);

    let parity = if grid.mode == 0 { 1.0 } else { -1.0 };
    let mut ev = Mat::zeros(nm + 2 * g, nr + nm);
    for j in 0..nm {
        ev[(j + g, nr + j)] = 1.0;
    }
    ev[(g - 1, nr)] = parity;
    ev[(g - 2, nr + 1)] = parity;
    // Linear interpolation across the interface reproduces u_I.
    for (k, &c) in interface_value.iter().enumerate() {
        ev[(nm + g, k)] = 2.0 * c;
        ev[(nm + g + 1, k)] = 2.0 * c;
    }
    ev[(nm + g, nr + nm - 1)] = -1.0;
    ev[(nm + g + 1, nr + nm - 2)] = -1.0;

    Ok(Closures {
        plate_u: eu,
        plate_theta: et,
        membrane: ev,
        interface_value,
        outer_trace_coef: 1.0 / (1.0 + a),
    })
}

fn interior_rows(m: &Mat<f64>, n: usize) -> Mat<f64> {
    m.as_ref().subrows(GHOSTS, n).to_owned()
}

/// Unweighted quadratic forms of one mode. Every symmetric form is a
/// weighted Gram product `B^T diag(w) B`.
#[derive(Debug, Clone)]
pub struct ModeOperators {
    pub closures: Closures,
    /// `N x (N-1)` discrete Laplacian of the displacement at plate nodes.
    pub lap_u: Mat<f64>,
    /// `N x (N-1)` nodal displacement values.
    pub nodal_u: Mat<f64>,
    /// `||f||^2` on the plate displacement space.
    pub plate_mass: Mat<f64>,
    /// `||grad f||^2` on the plate displacement space.
    pub plate_grad: Mat<f64>,
    /// `||Lap f||^2` on the plate displacement space.
    pub bending: Mat<f64>,
    /// `||grad v||^2` as a form on `(u_free, v)`.
    pub membrane_grad: Mat<f64>,
    /// Membrane mass (diagonal weights).
    pub membrane_mass: Mat<f64>,
    /// `||grad theta||^2` including the half cells at both ends.
    pub thermal_grad: Mat<f64>,
    /// `2 pi r_outer kappa |theta(r_outer)|^2`.
    pub thermal_boundary: Mat<f64>,
    /// `diag(W) * lap_u`, pairing temperature with `Lap u`.
    pub coupling: Mat<f64>,
}

/// Membrane mass weights `W_j (1 + n^2 h^2 / (4 r_j^2))`. The factor levels
/// the local top of the discrete spectrum, `4/h^2 + n^2/r_j^2`, to `4/h^2`,
/// so that no grid-scale state can sit at the origin below the interface
/// coupling. It differs from one by `O(h^2)` away from the origin, and the
/// solution vanishes like `r^n` near it.
pub fn membrane_mass_weights(grid: &RadialGrid) -> Vec<f64> {
    let n2 = grid.mode_sq();
    let h = grid.h_mem;
    grid.membrane_nodes
        .iter()
        .zip(&grid.membrane_weights)
        .map(|(&r, &w)| w * (1.0 + n2 * h * h / (4.0 * r * r)))
        .collect()
}

pub fn build_mode_operators(grid: &RadialGrid, kappa: f64) -> Result<ModeOperators> {
    let n = grid.n_plate();
    let nm = grid.n_mem();
    let nr = n - 1;
    let hp = grid.h_plate;
    let hm = grid.h_mem;
    let n2 = grid.mode_sq();
    let w = &grid.plate_weights;
    let wm = &grid.membrane_weights;
    let cl = build_closures(grid, kappa)?;

    let lp = laplacian_mode(grid, Domain::Plate);
    let lap_u = interior_rows(&(&lp * &cl.plate_u), n);
    let nodal_u = interior_rows(&cl.plate_u, n);

    let plate_mass = weighted_gram(nodal_u.as_ref(), w);
    let bending = weighted_gram(lap_u.as_ref(), w);

    // Plate gradient: inner faces plus the n^2 / r^2 rows. Boundary faces
    // carry zero slope.
    let rows = (n - 1) + if n2 > 0.0 { n } else { 0 };
    let mut b = Mat::zeros(rows, nr);
    let mut bw = Vec::with_capacity(rows);
    for i in 0..n - 1 {
        for k in 0..nr {
            b[(i, k)] = (nodal_u[(i + 1, k)] - nodal_u[(i, k)]) / hp;
        }
        bw.push(2.0 * PI * (grid.plate_nodes[i] + 0.5 * hp) * hp);
    }
    if n2 > 0.0 {
        for i in 0..n {
            let r = grid.plate_nodes[i];
            for k in 0..nr {
                b[(n - 1 + i, k)] = nodal_u[(i, k)] / r;
            }
            bw.push(n2 * w[i]);
        }
    }
    let plate_grad = weighted_gram(b.as_ref(), &bw);

    // Membrane gradient on (u_free, v): inner faces, the half face to the
    // interface value, and the n^2 / r^2 rows.
    let rows = (nm - 1) + 1 + if n2 > 0.0 { nm } else { 0 };
    let mut b = Mat::zeros(rows, nr + nm);
    let mut bw = Vec::with_capacity(rows);
    for j in 0..nm - 1 {
        b[(j, nr + j + 1)] = 1.0 / hm;
        b[(j, nr + j)] = -1.0 / hm;
        bw.push(2.0 * PI * (grid.membrane_nodes[j] + 0.5 * hm) * hm);
    }
    for (k, &c) in cl.interface_value.iter().enumerate() {
        b[(nm - 1, k)] = c / (0.5 * hm);
    }
    b[(nm - 1, nr + nm - 1)] = -1.0 / (0.5 * hm);
    bw.push(2.0 * PI * grid.r_interface * 0.5 * hm);
    if n2 > 0.0 {
        for j in 0..nm {
            b[(nm + j, nr + j)] = 1.0 / grid.membrane_nodes[j];
            bw.push(n2 * wm[j]);
        }
    }
    let membrane_grad = weighted_gram(b.as_ref(), &bw);
    let membrane_mass = crate::linalg::diag(&membrane_mass_weights(grid));

    // Temperature gradient: inner faces, the interface half face (theta = 0
    // there) and the outer half face to the Robin trace.
    let rows = (n - 1) + 2 + if n2 > 0.0 { n } else { 0 };
    let mut b = Mat::zeros(rows, n);
    let mut bw = Vec::with_capacity(rows);
    for i in 0..n - 1 {
        b[(i, i + 1)] = 1.0 / hp;
        b[(i, i)] = -1.0 / hp;
        bw.push(2.0 * PI * (grid.plate_nodes[i] + 0.5 * hp) * hp);
    }
    b[(n - 1, 0)] = 1.0 / (0.5 * hp);
    bw.push(2.0 * PI * grid.r_interface * 0.5 * hp);
    b[(n, n - 1)] = (cl.outer_trace_coef - 1.0) / (0.5 * hp);
    bw.push(2.0 * PI * grid.r_outer * 0.5 * hp);
    if n2 > 0.0 {
        for i in 0..n {
            b[(n + 1 + i, i)] = 1.0 / grid.plate_nodes[i];
            bw.push(n2 * w[i]);
        }
    }
    let thermal_grad = weighted_gram(b.as_ref(), &bw);
    let mut thermal_boundary = Mat::zeros(n, n);
    thermal_boundary[(n - 1, n - 1)] = 2.0 * PI * grid.r_outer * kappa * cl.outer_trace_coef * cl.outer_trace_coef;

    let coupling = Mat::from_fn(n, nr, |i, k| w[i] * lap_u[(i, k)]);

    Ok(ModeOperators {
        closures: cl,
        lap_u,
        nodal_u,
        plate_mass,
        plate_grad,
        bending,
        membrane_grad,
        membrane_mass,
        thermal_grad,
        thermal_boundary,
        coupling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::grid::build_radial_grid;
    use crate::model::AnnulusGeometry;

    fn grid(mode: i32) -> RadialGrid {
        build_radial_grid(&AnnulusGeometry::default(), 12, 10, mode).unwrap()
    }

    fn apply_interior(grid: &RadialGrid, domain: Domain, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let l = laplacian_mode(grid, domain);
        let x = extended_nodes(grid, domain);
        let fx = Mat::from_fn(x.len(), 1, |i, _| f(x[i]));
        let y = &l * &fx;
        (GHOSTS..x.len() - GHOSTS).map(|k| y[(k, 0)]).collect()
    }

    #[test]
    fn laplacian_exact_on_r_squared() {
        for domain in [Domain::Plate, Domain::Membrane] {
            for v in apply_interior(&grid(0), domain, |r| r * r) {
                assert!((v - 4.0).abs() < 1e-10, "{v}");
            }
            for v in apply_interior(&grid(2), domain, |r| r * r) {
                assert!(v.abs() < 1e-10, "{v}");
            }
            for v in apply_interior(&grid(0), domain, |_| 3.5) {
                assert!(v.abs() < 1e-10, "{v}");
            }
        }
    }

    #[test]
    fn ghost_rows_are_zero() {
        let l = laplacian_mode(&grid(1), Domain::Plate);
        let ne = l.nrows();
        for k in [0, 1, ne - 2, ne - 1] {
            assert!((0..ne).all(|j| l[(k, j)] == 0.0));
        }
    }

    #[test]
    fn clamped_map_is_exact_on_double_root() {
        // c (R - r)^2 and c (r - r_I)^2 + d are reproduced on the ghost layers.
        let g = grid(0);
        let cl = build_closures(&g, 1.0).unwrap();
        let x = extended_nodes(&g, Domain::Plate);
        let n = g.n_plate();
        let u: Vec<f64> = g.plate_nodes.iter().map(|r| (2.0 - r) * (2.0 - r)).collect();
        let red = Mat::from_fn(n - 1, 1, |i, _| u[i]);
        let ext = &cl.plate_u * &red;
        for k in n..n + 4 {
            let r = x[k];
            assert!((ext[(k, 0)] - (2.0 - r) * (2.0 - r)).abs() < 1e-12, "node {k}");
        }
        let u: Vec<f64> = g.plate_nodes.iter().map(|r| 0.3 + (r - 1.0) * (r - 1.0)).collect();
        let ui: f64 = cl.interface_value.iter().zip(&u).map(|(c, v)| c * v).sum();
        assert!((ui - 0.3).abs() < 1e-12);
    }

    #[test]
    fn thermal_form_matches_negative_weighted_laplacian() {
        for mode in [0, 3] {
            let g = grid(mode);
            let ops = build_mode_operators(&g, 0.7).unwrap();
            let l = laplacian_mode(&g, Domain::Plate);
            let lt = interior_rows(&(&l * &ops.closures.plate_theta), g.n_plate());
            let n = g.n_plate();
            for i in 0..n {
                for j in 0..n {
                    let lhs = ops.thermal_grad[(i, j)] + ops.thermal_boundary[(i, j)];
                    let rhs = -g.plate_weights[i] * lt[(i, j)];
                    assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()), "{i} {j}: {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn membrane_form_matches_negative_weighted_laplacian() {
        for mode in [0, 1, 4] {
            let g = grid(mode);
            let ops = build_mode_operators(&g, 1.0).unwrap();
            let l = laplacian_mode(&g, Domain::Membrane);
            let nm = g.n_mem();
            let nr = g.n_plate() - 1;
            let lv = interior_rows(&(&l * &ops.closures.membrane), nm);
            for j in 0..nm {
                for k in 0..nr + nm {
                    let lhs = ops.membrane_grad[(nr + j, k)];
                    let rhs = -g.membrane_weights[j] * lv[(j, k)];
                    assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()), "{j} {k}: {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn plate_gradient_matches_negative_weighted_laplacian() {
        let g = grid(2);
        let ops = build_mode_operators(&g, 1.0).unwrap();
        let lw = Mat::from_fn(g.n_plate(), g.n_plate() - 1, |i, k| -g.plate_weights[i] * ops.lap_u[(i, k)]);
        let rhs = ops.nodal_u.transpose() * &lw;
        for i in 0..rhs.nrows() {
            for j in 0..rhs.ncols() {
                assert!((ops.plate_grad[(i, j)] - rhs[(i, j)]).abs() < 1e-9 * (1.0 + rhs[(i, j)].abs()));
            }
        }
    }
}
