//! Dense helpers on top of `faer`: weighted Gram products, checked
//! Cholesky, real-matrix/complex-vector products and a complex Hessenberg
//! LU used by the resolvent iteration.

use faer::linalg::solvers::{Llt, PartialPivLu, Solve};
use faer::{Mat, MatRef, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// `B^T diag(w) B`, symmetrized so the result is exactly symmetric.
pub fn weighted_gram(b: MatRef<'_, f64>, w: &[f64]) -> Mat<f64> {
    assert_eq!(b.nrows(), w.len());
    let wb = Mat::from_fn(b.nrows(), b.ncols(), |i, j| w[i] * b[(i, j)]);
    let g = b.transpose() * &wb;
    symmetrize(&g)
}

pub fn symmetrize(a: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

pub fn diag(values: &[f64]) -> Mat<f64> {
    Mat::from_fn(values.len(), values.len(), |i, j| if i == j { values[i] } else { 0.0 })
}

/// Cholesky factorization with a relative pivot floor of
/// `1e-13 * trace / dim`.
pub fn checked_cholesky(a: MatRef<'_, f64>, what: &'static str) -> Result<Llt<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Err(Error::NotPositiveDefinite { what });
    }
    let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
    let llt = a.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite { what })?;
    let floor = 1e-13 * trace / n as f64;
    let l = llt.L();
    if (0..n).any(|i| !(l[(i, i)] * l[(i, i)] > floor)) {
        return Err(Error::NotPositiveDefinite { what });
    }
    Ok(llt)
}

pub fn lu(a: MatRef<'_, f64>, what: &str) -> Result<PartialPivLu<f64>> {
    let lu = a.partial_piv_lu();
    let u = lu.U();
    let scale = (0..u.nrows()).map(|i| u[(i, i)].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || (0..u.nrows()).any(|i| !(u[(i, i)].abs() > 1e-300 * scale.max(1.0)) || !u[(i, i)].is_finite()) {
        return Err(Error::SingularSystem(what.to_string()));
    }
    Ok(lu)
}

/// Packs a complex vector as an `n x 2` real matrix `[re, im]`.
pub fn pack(x: &[Complex64]) -> Mat<f64> {
    Mat::from_fn(x.len(), 2, |i, j| if j == 0 { x[i].re } else { x[i].im })
}

pub fn unpack(m: MatRef<'_, f64>) -> Vec<Complex64> {
    (0..m.nrows()).map(|i| Complex64::new(m[(i, 0)], m[(i, 1)])).collect()
}

/// Real matrix times complex vector.
pub fn matvec(a: MatRef<'_, f64>, x: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(a.ncols(), x.len());
    let p = pack(x);
    unpack((a * &p).as_ref())
}

/// Solves with a cached real factorization, column-wise on `[re, im]`.
pub fn solve_complex<S: Solve<f64>>(f: &S, rhs: &[Complex64]) -> Vec<Complex64> {
    let p = pack(rhs);
    unpack(f.solve(&p).as_ref())
}

/// Hermitian form `x^* A y` for real `A`.
pub fn form(a: MatRef<'_, f64>, x: &[Complex64], y: &[Complex64]) -> Complex64 {
    let ay = matvec(a, y);
    x.iter().zip(&ay).map(|(xi, yi)| xi.conj() * yi).sum()
}

/// Real part of the Hermitian form `x^* A x`.
pub fn quad(a: MatRef<'_, f64>, x: &[Complex64]) -> f64 {
    form(a, x, x).re
}

pub fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Real upper Hessenberg form `H = Q^T A Q` by Householder reflections.
/// Only `H` is returned; the orthogonal factor is not needed for norms.
pub fn hessenberg(a: MatRef<'_, f64>) -> Mat<f64> {
    let n = a.nrows();
    let mut h = a.to_owned();
    let mut v = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let alpha_sq: f64 = (k + 1..n).map(|i| h[(i, k)] * h[(i, k)]).sum();
        let alpha = alpha_sq.sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let beta = if x0 >= 0.0 { -alpha } else { alpha };
        for i in 0..n {
            v[i] = 0.0;
        }
        v[k + 1] = x0 - beta;
        for i in k + 2..n {
            v[i] = h[(i, k)];
        }
        let vnorm_sq: f64 = v[k + 1..].iter().map(|x| x * x).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm_sq;
        // H <- (I - tau v v^T) H
        for j in k..n {
            let s: f64 = (k + 1..n).map(|i| v[i] * h[(i, j)]).sum::<f64>() * tau;
            if s != 0.0 {
                for i in k + 1..n {
                    h[(i, j)] -= s * v[i];
                }
            }
        }
        // H <- H (I - tau v v^T)
        for i in 0..n {
            let s: f64 = (k + 1..n).map(|j| h[(i, j)] * v[j]).sum::<f64>() * tau;
            if s != 0.0 {
                for j in k + 1..n {
                    h[(i, j)] -= s * v[j];
                }
            }
        }
        h[(k + 1, k)] = beta;
        for i in k + 2..n {
            h[(i, k)] = 0.0;
        }
    }
    h
}

/// LU factorization with adjacent-row partial pivoting of the complex upper
/// Hessenberg matrix `shift * I + scale * H`.
pub struct HessenbergLu {
    /// Row-major upper triangle.
    u: Vec<Complex64>,
    mult: Vec<Complex64>,
    swapped: Vec<bool>,
    n: usize,
}

impl HessenbergLu {
    pub fn new(h: MatRef<'_, f64>, shift: Complex64, scale: f64) -> Self {
        let n = h.nrows();
        let mut u = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in i.saturating_sub(1)..n {
                u[i * n + j] = Complex64::new(scale * h[(i, j)], 0.0);
            }
            u[i * n + i] += shift;
        }
        let mut mult = vec![Complex64::new(0.0, 0.0); n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for k in 0..n.saturating_sub(1) {
            let a = u[k * n + k];
            let b = u[(k + 1) * n + k];
            if b.norm() > a.norm() {
                for j in k..n {
                    u.swap(k * n + j, (k + 1) * n + j);
                }
                swapped[k] = true;
            }
            let piv = u[k * n + k];
            let l = if piv.norm() == 0.0 { Complex64::new(0.0, 0.0) } else { u[(k + 1) * n + k] / piv };
            mult[k] = l;
            u[(k + 1) * n + k] = Complex64::new(0.0, 0.0);
            if l.norm() != 0.0 {
                for j in k + 1..n {
                    let t = u[k * n + j];
                    u[(k + 1) * n + j] -= l * t;
                }
            }
        }
        Self { u, mult, swapped, n }
    }

    pub fn min_pivot(&self) -> f64 {
        (0..self.n).map(|i| self.u[i * self.n + i].norm()).fold(f64::INFINITY, f64::min)
    }

    /// Solves `K x = b` in place.
    pub fn solve(&self, b: &mut [Complex64]) {
        let n = self.n;
        for k in 0..n.saturating_sub(1) {
            if self.swapped[k] {
                b.swap(k, k + 1);
            }
            let t = b[k];
            b[k + 1] -= self.mult[k] * t;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.u[i * n + j] * b[j];
            }
            b[i] = s / self.u[i * n + i];
        }
    }

    /// Solves `K^* x = b` in place.
    pub fn solve_adjoint(&self, b: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.u[j * n + i].conj() * b[j];
            }
            b[i] = s / self.u[i * n + i].conj();
        }
        for k in (0..n.saturating_sub(1)).rev() {
            let t = b[k + 1];
            b[k] -= self.mult[k].conj() * t;
            if self.swapped[k] {
                b.swap(k, k + 1);
            }
        }
    }
}
