#![allow(dead_code)]

use faer::Mat;
use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;
use platemem::discretization::ModePencil;
use platemem::model::{AnnulusGeometry, PhysicalParams, RegimeLabel};

/// One representative parameter set per regime label, in `RegimeLabel::ALL`
/// order.
pub fn cells() -> Vec<(RegimeLabel, PhysicalParams, AnnulusGeometry)> {
    let g = AnnulusGeometry::default();
    let off = AnnulusGeometry { x0: [2.0, 0.0], ..g };
    vec![
        (RegimeLabel::ExponentialRhoDamped, PhysicalParams::unit(1.0, 1.0, 0.0, 1.0), g),
        (RegimeLabel::ExponentialThermalOnly, PhysicalParams::unit(1.0, 0.0, 0.0, 1.0), g),
        (RegimeLabel::StrongOnlyUnproven, PhysicalParams::unit(1.0, 0.0, 1.0, 1.0), g),
        (RegimeLabel::NotExponentialPolynomial, PhysicalParams::unit(0.0, 1.0, 0.0, 1.0), g),
        (RegimeLabel::NotExponentialNoRate, PhysicalParams::unit(0.0, 0.0, 0.0, 1.0), g),
        (RegimeLabel::NotExponentialGeometryFails, PhysicalParams::unit(0.0, 1.0, 0.0, 1.0), off),
    ]
}

pub fn to_na(a: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub fn to_na_vec(x: &[Complex64]) -> DVector<Complex<f64>> {
    DVector::from_iterator(x.len(), x.iter().map(|z| Complex::new(z.re, z.im)))
}

/// `M^{-1} A` by nalgebra's LU.
pub fn generator(p: &ModePencil) -> DMatrix<f64> {
    to_na(&p.m).lu().solve(&to_na(&p.a)).expect("mass matrix is invertible")
}

/// `exp(t M^{-1} A) x` through nalgebra's matrix exponential.
pub fn propagate(p: &ModePencil, x: &[Complex64], t: f64) -> Vec<Complex64> {
    let e = (generator(p) * t).exp().map(|v| Complex::new(v, 0.0));
    (e * to_na_vec(x)).iter().map(|z| Complex64::new(z.re, z.im)).collect()
}

/// `sqrt(x^H G x)`.
pub fn energy_norm(p: &ModePencil, x: &[Complex64]) -> f64 {
    let g = to_na(&p.g).map(|v| Complex::new(v, 0.0));
    let v = to_na_vec(x);
    (v.adjoint() * &g * &v)[(0, 0)].re.max(0.0).sqrt()
}

/// Eigenvalues of `M^{-1} A` from nalgebra's real Schur form.
pub fn oracle_eigenvalues(p: &ModePencil) -> Vec<Complex64> {
    generator(p).complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect()
}

/// `J_0` from its power series; accurate to ~1e-14 for `x < 12`.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
    }
    sum
}

/// `k`-th positive zero of `J_0` by bisection on `[k pi - 1, k pi]`, valid
/// for `k = 1..=3`.
pub fn j0_zero(k: usize) -> f64 {
    let (mut a, mut b) = (k as f64 * std::f64::consts::PI - 1.0, k as f64 * std::f64::consts::PI);
    let fa = bessel_j0(a);
    assert!(fa * bessel_j0(b) < 0.0, "no sign change for k = {k}");
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        if bessel_j0(c) * fa > 0.0 {
            a = c;
        } else {
            b = c;
        }
    }
    0.5 * (a + b)
}
