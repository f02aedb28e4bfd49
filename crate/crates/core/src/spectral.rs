//! Spectra of mode pencils and energy-norm resolvent scans along the
//! imaginary axis.

use faer::linalg::solvers::Solve;
use faer::{Mat, Par};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::discretization::{assemble_mode_pencil, build_radial_grid, ModePencil};
use crate::error::{Error, Result};
use crate::linalg::{checked_cholesky, hessenberg, lu, HessenbergLu};
use crate::model::{AnnulusGeometry, PhysicalParams};

pub const RELATIVE_TOL: f64 = 1e-8;
pub const COLLISION_SHIFT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub mode: i32,
    pub eigenvalues: Vec<Complex64>,
    pub spectral_abscissa: f64,
    /// `min |Re lambda|`.
    pub imag_axis_gap: f64,
    /// No eigenvalue within `tol` of the origin.
    pub zero_in_resolvent: bool,
    /// `1e-8 * max |lambda|`.
    pub tol: f64,
}

impl SpectrumResult {
    pub fn from_eigenvalues(mode: i32, mut eigenvalues: Vec<Complex64>) -> Self {
        eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
        let max_abs = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tol = RELATIVE_TOL * max_abs;
        let spectral_abscissa = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let imag_axis_gap = eigenvalues.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
        let min_abs = eigenvalues.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        Self { mode, eigenvalues, spectral_abscissa, imag_axis_gap, zero_in_resolvent: min_abs > tol, tol }
    }

    pub fn max_abs(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest distance from an eigenvalue to the nearest conjugate of
    /// another (or the same) eigenvalue.
    pub fn conjugate_pairing_error(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| self.eigenvalues.iter().map(|w| (z.conj() - w).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
}

/// Eigenvalues of `A x = lambda B x` for symmetric positive definite `B`,
/// through the similar standard problem `L^{-1} A L^{-T}` with `B = L L^T`.
pub fn generalized_eigenvalues(a: &Mat<f64>, b: &Mat<f64>, mode: i32) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let c = cholesky_reduction(a, b)?;
    let ev = c.eigenvalues().map_err(|_| Error::EigenFailure { dim: n, mode })?;
    if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::EigenFailure { dim: n, mode });
    }
    Ok(ev)
}

/// `L^{-1} A L^{-T}` with `B = L L^T`.
pub fn cholesky_reduction(a: &Mat<f64>, b: &Mat<f64>) -> Result<Mat<f64>> {
    let chol = checked_cholesky(b.as_ref(), "M")?;
    let l = chol.L();
    let mut x = a.clone();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, x.as_mut(), Par::Seq);
    let mut y = x.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, y.as_mut(), Par::Seq);
    Ok(y.transpose().to_owned())
}

pub fn eigenvalues(pencil: &ModePencil) -> Result<SpectrumResult> {
    let ev = generalized_eigenvalues(&pencil.a, &pencil.m, pencil.mode)?;
    Ok(SpectrumResult::from_eigenvalues(pencil.mode, ev))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepLevel {
    pub n_plate: usize,
    pub n_mem: usize,
    pub modes: Vec<i32>,
    pub abscissa: Vec<f64>,
    pub global: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbscissaSweep {
    pub coarse: SweepLevel,
    /// Same modes at doubled resolution.
    pub fine: SweepLevel,
}

pub fn sweep_level(
    p: &PhysicalParams,
    g: &AnnulusGeometry,
    n_plate: usize,
    n_mem: usize,
    modes: &[i32],
) -> Result<SweepLevel> {
    let abscissa = modes
        .par_iter()
        .map(|&k| {
            let grid = build_radial_grid(g, n_plate, n_mem, k)?;
            Ok(eigenvalues(&assemble_mode_pencil(p, &grid)?)?.spectral_abscissa)
        })
        .collect::<Result<Vec<f64>>>()?;
    let global = abscissa.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SweepLevel { n_plate, n_mem, modes: modes.to_vec(), abscissa, global })
}

/// Per-mode spectral abscissa at `(n_plate, n_mem)` and at twice that
/// resolution.
pub fn spectral_abscissa_sweep(
    p: &PhysicalParams,
    g: &AnnulusGeometry,
    n_plate: usize,
    n_mem: usize,
    modes: &[i32],
) -> Result<AbscissaSweep> {
    Ok(AbscissaSweep {
        coarse: sweep_level(p, g, n_plate, n_mem, modes)?,
        fine: sweep_level(p, g, 2 * n_plate, 2 * n_mem, modes)?,
    })
}

impl AbscissaSweep {
    /// `|coarse| / |fine|` of the global abscissa.
    pub fn shrink_factor(&self) -> f64 {
        self.coarse.global.abs() / self.fine.global.abs()
    }
}

/// Modes `0..=n_max` at `(n_plate, n_mem)` against modes `0..=2 n_max` at
/// doubled resolution.
pub fn abscissa_refinement(
    p: &PhysicalParams,
    g: &AnnulusGeometry,
    n_plate: usize,
    n_mem: usize,
    n_max: i32,
) -> Result<AbscissaSweep> {
    let coarse: Vec<i32> = (0..=n_max).collect();
    let fine: Vec<i32> = (0..=2 * n_max).collect();
    Ok(AbscissaSweep {
        coarse: sweep_level(p, g, n_plate, n_mem, &coarse)?,
        fine: sweep_level(p, g, 2 * n_plate, 2 * n_mem, &fine)?,
    })
}

/// The generator in energy coordinates, `B = F M^{-1} A F^{-1}` with
/// `G = F^T F`, reduced to Hessenberg form once for fast shifted solves.
pub struct ResolventOperator {
    h: Mat<f64>,
    h_lu: Option<HessenbergLu>,
    eigenvalues: Vec<Complex64>,
    scale: f64,
}

const POWER_MAX_ITER: usize = 400;
const POWER_TOL: f64 = 1e-11;

impl ResolventOperator {
    pub fn new(pencil: &ModePencil) -> Result<Self> {
        let b = energy_similarity(pencil)?;
        let h = hessenberg(b.as_ref());
        let eigenvalues = h.eigenvalues().map_err(|_| Error::EigenFailure { dim: h.nrows(), mode: pencil.mode })?;
        let scale = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let h_lu = HessenbergLu::new(h.as_ref(), Complex64::new(0.0, 0.0), 1.0);
        let h_lu = (h_lu.min_pivot() > 1e-14 * scale).then_some(h_lu);
        Ok(Self { h, h_lu, eigenvalues, scale })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    fn shifted(&self, lambda: f64) -> Result<HessenbergLu> {
        let shift = Complex64::new(0.0, lambda);
        let near = self.eigenvalues.iter().map(|z| (z - shift).norm()).fold(f64::INFINITY, f64::min);
        if near <= 1e-12 * self.scale.max(1.0) {
            return Err(Error::SingularShift { lambda });
        }
        let k = HessenbergLu::new(self.h.as_ref(), shift, -1.0);
        if !(k.min_pivot() > 0.0) {
            return Err(Error::SingularShift { lambda });
        }
        Ok(k)
    }

    /// `|| (i lambda - A)^{-1} ||` in the energy norm.
    pub fn norm(&self, lambda: f64) -> Result<f64> {
        let k = self.shifted(lambda)?;
        Ok(largest_singular_value(self.dim(), |x| k.solve(x), |x| k.solve_adjoint(x)))
    }

    /// `|| (i lambda - A)^{-1} A^{-1} ||` in the energy norm: the resolvent
    /// measured against the graph norm of the data.
    pub fn graph_norm(&self, lambda: f64) -> Result<f64> {
        let k = self.shifted(lambda)?;
        let h = self
            .h_lu
            .as_ref()
            .ok_or_else(|| Error::SingularSystem("generator has a (numerically) zero eigenvalue".into()))?;
        Ok(largest_singular_value(
            self.dim(),
            |x| {
                h.solve(x);
                k.solve(x);
            },
            |x| {
                k.solve_adjoint(x);
                h.solve_adjoint(x);
            },
        ))
    }
}

/// `F M^{-1} A F^{-1}` with `G = F^T F`.
pub fn energy_similarity(pencil: &ModePencil) -> Result<Mat<f64>> {
    let n = pencil.dim();
    let l = lu(pencil.m.as_ref(), "mass matrix")?.solve(&pencil.a);
    let chol = checked_cholesky(pencil.g.as_ref(), "G")?;
    let f = chol.L().transpose().to_owned();
    let fl = &f * &l;
    // X F = FL  <=>  F^T X^T = (FL)^T
    let xt = lu(f.transpose().to_owned().as_ref(), "Cholesky factor")?.solve(&fl.transpose().to_owned());
    Ok(Mat::from_fn(n, n, |i, j| xt[(j, i)]))
}

/// Power iteration on `X^* X` given callbacks applying `X` and `X^*` in place.
fn largest_singular_value(
    n: usize,
    apply: impl Fn(&mut [Complex64]),
    apply_adjoint: impl Fn(&mut [Complex64]),
) -> f64 {
    let mut x: Vec<Complex64> =
        (0..n).map(|i| Complex64::new(1.0 + 0.1 * ((i * 7) % 11) as f64, 0.05 * ((i * 3) % 5) as f64)).collect();
    normalize(&mut x);
    let mut sigma = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let mut y = x.clone();
        apply(&mut y);
        let s = crate::linalg::norm2(&y);
        if !(s > 0.0) || !s.is_finite() {
            return f64::INFINITY;
        }
        apply_adjoint(&mut y);
        normalize(&mut y);
        x = y;
        let done = (s - sigma).abs() <= POWER_TOL * s;
        sigma = s;
        if done {
            break;
        }
    }
    sigma
}

fn normalize(x: &mut [Complex64]) {
    let s = crate::linalg::norm2(x);
    if s > 0.0 {
        for z in x.iter_mut() {
            *z /= s;
        }
    }
}

/// Exact resolvent norm by a dense SVD of `F (i lambda M - A)^{-1} M F^{-1}`.
pub fn resolvent_norm_dense(pencil: &ModePencil, lambda: f64) -> Result<f64> {
    let b = energy_similarity(pencil)?;
    let n = b.nrows();
    let k = Mat::<faer::c64>::from_fn(n, n, |i, j| {
        let d = if i == j { Complex64::new(0.0, lambda) } else { Complex64::new(0.0, 0.0) };
        d - b[(i, j)]
    });
    let s = k.singular_values().map_err(|_| Error::SingularSystem("svd failed".into()))?;
    let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smin > 0.0) {
        return Err(Error::SingularShift { lambda });
    }
    Ok(1.0 / smin)
}

pub fn resolvent_norm(pencil: &ModePencil, lambda: f64) -> Result<f64> {
    ResolventOperator::new(pencil)?.norm(lambda)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventScan {
    pub mode: i32,
    pub lambdas: Vec<f64>,
    pub norms: Vec<f64>,
    /// Resolvent measured against the graph norm of the data.
    pub graph_norms: Vec<f64>,
    pub sup_norm: f64,
    /// Log-log slope of the local maxima of `norms` over the upper half of
    /// the range; `None` with fewer than two maxima there.
    pub growth_exponent: Option<f64>,
    pub graph_growth_exponent: Option<f64>,
}

/// Uniform samples on `[lambda_min, lambda_max]` merged with the imaginary
/// parts of eigenvalues that fall in the range, so that resonance peaks are
/// hit. Samples closer than `1e-12 * scale` to an eigenvalue are moved by
/// `1e-9`.
pub fn scan_samples(op: &ResolventOperator, lambda_min: f64, lambda_max: f64, n_samples: usize) -> Vec<f64> {
    let mut s: Vec<f64> = if n_samples <= 1 {
        vec![lambda_min]
    } else {
        (0..n_samples)
            .map(|k| lambda_min + (lambda_max - lambda_min) * k as f64 / (n_samples - 1) as f64)
            .collect()
    };
    s.extend(op.eigenvalues.iter().map(|z| z.im).filter(|&l| l >= lambda_min && l <= lambda_max));
    s.sort_by(f64::total_cmp);
    s.dedup();
    let tol = 1e-12 * op.scale.max(1.0);
    for l in s.iter_mut() {
        while op.eigenvalues.iter().any(|z| (z - Complex64::new(0.0, *l)).norm() <= tol) {
            *l += COLLISION_SHIFT;
        }
    }
    s
}

pub fn resolvent_scan(pencil: &ModePencil, lambda_min: f64, lambda_max: f64, n_samples: usize) -> Result<ResolventScan> {
    if !(lambda_max > lambda_min) || n_samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "scan needs lambda_min < lambda_max and at least 2 samples, got [{lambda_min}, {lambda_max}] with {n_samples}"
        )));
    }
    let op = ResolventOperator::new(pencil)?;
    let lambdas = scan_samples(&op, lambda_min, lambda_max, n_samples);
    let pairs = lambdas
        .par_iter()
        .map(|&l| Ok((op.norm(l)?, op.graph_norm(l)?)))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let norms: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let graph_norms: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let sup_norm = norms.iter().copied().fold(0.0, f64::max);
    let lo = 0.5 * (lambda_min + lambda_max);
    Ok(ResolventScan {
        mode: pencil.mode,
        growth_exponent: peak_growth_exponent(&lambdas, &norms, lo),
        graph_growth_exponent: peak_growth_exponent(&lambdas, &graph_norms, lo),
        lambdas,
        norms,
        graph_norms,
        sup_norm,
    })
}

/// Least-squares slope of `log s` against `log lambda` over the local maxima
/// of `s` with `lambda >= lo` and `lambda > 0`.
pub fn peak_growth_exponent(lambdas: &[f64], s: &[f64], lo: f64) -> Option<f64> {
    let n = lambdas.len();
    let mut pts = Vec::new();
    for i in 0..n {
        if lambdas[i] < lo || lambdas[i] <= 0.0 {
            continue;
        }
        let left = i == 0 || s[i] >= s[i - 1];
        let right = i + 1 == n || s[i] >= s[i + 1];
        if left && right && s[i] > 0.0 && s[i].is_finite() {
            pts.push((lambdas[i].ln(), s[i].ln()));
        }
    }
    if pts.len() < 2 {
        return None;
    }
    crate::lab::least_squares(&pts).map(|f| f.slope)
}

/// Scans every mode and keeps the pointwise maximum (the full operator is
/// the orthogonal sum of its modes).
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalScan {
    pub per_mode: Vec<ResolventScan>,
    pub sup_norm: f64,
    pub growth_exponent: Option<f64>,
    pub graph_growth_exponent: Option<f64>,
}

pub fn global_resolvent_scan(
    p: &PhysicalParams,
    g: &AnnulusGeometry,
    n_plate: usize,
    n_mem: usize,
    modes: &[i32],
    lambda_min: f64,
    lambda_max: f64,
    n_samples: usize,
) -> Result<GlobalScan> {
    let per_mode = modes
        .par_iter()
        .map(|&k| {
            let grid = build_radial_grid(g, n_plate, n_mem, k)?;
            resolvent_scan(&assemble_mode_pencil(p, &grid)?, lambda_min, lambda_max, n_samples)
        })
        .collect::<Result<Vec<_>>>()?;
    let sup_norm = per_mode.iter().map(|s| s.sup_norm).fold(0.0, f64::max);
    // Envelope over modes on the merged sample set.
    let mut merged: Vec<(f64, f64, f64)> = per_mode
        .iter()
        .flat_map(|s| s.lambdas.iter().zip(&s.norms).zip(&s.graph_norms).map(|((l, a), b)| (*l, *a, *b)))
        .collect();
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lam: Vec<f64> = merged.iter().map(|m| m.0).collect();
    let s: Vec<f64> = merged.iter().map(|m| m.1).collect();
    let sg: Vec<f64> = merged.iter().map(|m| m.2).collect();
    let lo = 0.5 * (lambda_min + lambda_max);
    Ok(GlobalScan {
        sup_norm,
        growth_exponent: peak_growth_exponent(&lam, &s, lo),
        graph_growth_exponent: peak_growth_exponent(&lam, &sg, lo),
        per_mode,
    })
}
