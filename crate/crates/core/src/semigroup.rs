//! Crank-Nicolson time stepping of `M w' = A w`, energy bookkeeping and a
//! dense matrix-exponential reference propagator.

use std::str::FromStr;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretization::{ModePencil, RadialGrid};
use crate::error::{Error, Result};
use crate::linalg::{lu, pack, quad, symmetrize, unpack};
use crate::model::PhysicalParams;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub mode: i32,
    pub coefficients: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(pencil: &ModePencil) -> Self {
        Self { mode: pencil.mode, coefficients: vec![Complex64::new(0.0, 0.0); pencil.dim()] }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { mode: self.mode, coefficients: self.coefficients.iter().map(|z| z * s).collect() }
    }

    fn check(&self, pencil: &ModePencil) -> Result<()> {
        if self.coefficients.len() != pencil.dim() {
            return Err(Error::DimensionMismatch { expected: pencil.dim(), got: self.coefficients.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub total: f64,
    /// Bending, plate kinetic, rotational, thermal, membrane potential and
    /// membrane kinetic parts, each already halved.
    pub components: [f64; 6],
}

pub fn energy(pencil: &ModePencil, state: &StateVector) -> Result<EnergyBreakdown> {
    state.check(pencil)?;
    let x = &state.coefficients;
    let mut components = [0.0; 6];
    for (c, f) in components.iter_mut().zip(&pencil.energy_forms) {
        *c = 0.5 * f.eval(x);
    }
    Ok(EnergyBreakdown { total: 0.5 * quad(pencil.g.as_ref(), x), components })
}

/// The four physical dissipation channels: structural damping, thermal
/// conduction, boundary cooling, membrane damping.
pub fn dissipation(pencil: &ModePencil, state: &StateVector) -> Result<[f64; 4]> {
    state.check(pencil)?;
    let mut d = [0.0; 4];
    for (c, f) in d.iter_mut().zip(&pencil.dissipation_forms) {
        *c = f.eval(&state.coefficients).max(0.0);
    }
    Ok(d)
}

/// `Q` with `x^* Q x = -Re <M^{-1} A x, x>_G`.
pub fn pencil_dissipation_matrix(pencil: &ModePencil) -> Result<Mat<f64>> {
    let f = lu(pencil.m.as_ref(), "mass matrix")?;
    let l = f.solve(&pencil.a);
    let ga = &pencil.g * &l;
    let s = symmetrize(&ga);
    Ok(Mat::from_fn(s.nrows(), s.ncols(), |i, j| -s[(i, j)]))
}

/// Cached factorization of `M - dt/2 A` for repeated steps.
pub struct CrankNicolson {
    lu: PartialPivLu<f64>,
    rhs: Mat<f64>,
    pub dt: f64,
    dim: usize,
}

impl CrankNicolson {
    pub fn new(pencil: &ModePencil, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let n = pencil.dim();
        let lhs = Mat::from_fn(n, n, |i, j| pencil.m[(i, j)] - 0.5 * dt * pencil.a[(i, j)]);
        let rhs = Mat::from_fn(n, n, |i, j| pencil.m[(i, j)] + 0.5 * dt * pencil.a[(i, j)]);
        let lu = lu(lhs.as_ref(), "trapezoidal matrix M - dt/2 A")?;
        Ok(Self { lu, rhs, dt, dim: n })
    }

    /// One step on a packed `n x 2` `[re, im]` state.
    pub fn step_packed(&self, x: &Mat<f64>) -> Mat<f64> {
        let b = &self.rhs * x;
        self.lu.solve(&b)
    }

    pub fn step(&self, state: &StateVector) -> Result<StateVector> {
        if state.coefficients.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: state.coefficients.len() });
        }
        let y = self.step_packed(&pack(&state.coefficients));
        Ok(StateVector { mode: state.mode, coefficients: unpack(y.as_ref()) })
    }
}

/// A single trapezoidal step. Use [`CrankNicolson`] to reuse the
/// factorization across steps.
pub fn step_crank_nicolson(pencil: &ModePencil, state: &StateVector, dt: f64) -> Result<StateVector> {
    state.check(pencil)?;
    CrankNicolson::new(pencil, dt)?.step(state)
}

#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub mode: i32,
    pub dt: f64,
    /// Time steps between consecutive samples.
    pub stride: usize,
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub breakdown: Vec<[f64; 6]>,
    /// Physical channels at each sample.
    pub dissipation: Vec<[f64; 4]>,
    /// `residual[k]` is the energy-balance residual of the step that ends at
    /// `times[k]`; `residual[0] = 0`. Empty for strided traces.
    pub residual: Vec<f64>,
    /// Pencil dissipation `D(w_mid)` of the step that ends at `times[k]`.
    /// Empty for strided traces.
    pub pencil_dissipation: Vec<f64>,
    /// `||w0||_G + ||M^{-1} A w0||_G`.
    pub graph_norm_initial: f64,
    pub final_state: StateVector,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|r_k| dt / E_0` over all steps.
    pub fn max_relative_residual(&self) -> f64 {
        let e0 = self.energy[0].max(f64::MIN_POSITIVE);
        self.residual.iter().map(|r| r.abs() * self.dt / e0).fold(0.0, f64::max)
    }

    /// Largest energy increase over one step, relative to `E_0`.
    pub fn max_relative_increase(&self) -> f64 {
        let e0 = self.energy[0].max(f64::MIN_POSITIVE);
        self.energy.windows(2).map(|w| (w[1] - w[0]) / e0).fold(0.0, f64::max)
    }
}

/// `||M^{-1} A x||_G`.
pub fn generator_norm(pencil: &ModePencil, x: &[Complex64]) -> Result<f64> {
    let f = lu(pencil.m.as_ref(), "mass matrix")?;
    let y = unpack(f.solve(&(&pencil.a * &pack(x))).as_ref());
    Ok(quad(pencil.g.as_ref(), &y).max(0.0).sqrt())
}

fn packed_quad(q: &Mat<f64>, x: &Mat<f64>) -> f64 {
    let y = q * x;
    (0..x.nrows()).map(|i| x[(i, 0)] * y[(i, 0)] + x[(i, 1)] * y[(i, 1)]).sum()
}

pub fn simulate(pencil: &ModePencil, initial: &StateVector, dt: f64, t_end: f64) -> Result<SimulationTrace> {
    initial.check(pencil)?;
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("t_end must be positive, got {t_end}")));
    }
    let stepper = CrankNicolson::new(pencil, dt)?;
    let q = pencil_dissipation_matrix(pencil)?;
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;

    let w0 = &initial.coefficients;
    let graph_norm_initial = quad(pencil.g.as_ref(), w0).max(0.0).sqrt() + generator_norm(pencil, w0)?;

    let mut times = Vec::with_capacity(steps + 1);
    let mut energies = Vec::with_capacity(steps + 1);
    let mut breakdown = Vec::with_capacity(steps + 1);
    let mut channels = Vec::with_capacity(steps + 1);
    let mut residual = Vec::with_capacity(steps + 1);
    let mut pencil_d = Vec::with_capacity(steps + 1);

    let mut x = pack(w0);
    let mut record = |x: &Mat<f64>, k: usize| -> Result<f64> {
        let s = StateVector { mode: pencil.mode, coefficients: unpack(x.as_ref()) };
        let e = energy(pencil, &s)?;
        times.push(k as f64 * dt);
        energies.push(e.total);
        breakdown.push(e.components);
        channels.push(dissipation(pencil, &s)?);
        Ok(e.total)
    };
    let mut e_prev = record(&x, 0)?;
    residual.push(0.0);
    pencil_d.push(0.0);
    for k in 1..=steps {
        let y = stepper.step_packed(&x);
        let mid = Mat::from_fn(x.nrows(), 2, |i, j| 0.5 * (x[(i, j)] + y[(i, j)]));
        let d_mid = packed_quad(&q, &mid);
        let e_next = record(&y, k)?;
        residual.push((e_next - e_prev) / dt + d_mid);
        pencil_d.push(d_mid);
        e_prev = e_next;
        x = y;
    }
    Ok(SimulationTrace {
        mode: pencil.mode,
        dt,
        stride: 1,
        times,
        energy: energies,
        breakdown,
        dissipation: channels,
        residual,
        pencil_dissipation: pencil_d,
        graph_norm_initial,
        final_state: StateVector { mode: pencil.mode, coefficients: unpack(x.as_ref()) },
    })
}

/// Crank-Nicolson sampled every `stride` steps. The `stride`-step
/// propagator is formed once by repeated squaring, so long horizons with
/// small steps stay cheap. Energy and channels are recorded at the samples
/// only.
pub fn simulate_strided(
    pencil: &ModePencil,
    initial: &StateVector,
    dt: f64,
    t_end: f64,
    stride: usize,
) -> Result<SimulationTrace> {
    initial.check(pencil)?;
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("t_end must be positive, got {t_end}")));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let stepper = CrankNicolson::new(pencil, dt)?;
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let samples = steps.div_ceil(stride);
    let one = stepper.lu.solve(&stepper.rhs);
    let prop = matrix_power(&one, stride);

    let w0 = &initial.coefficients;
    let graph_norm_initial = quad(pencil.g.as_ref(), w0).max(0.0).sqrt() + generator_norm(pencil, w0)?;
    let mut times = Vec::with_capacity(samples + 1);
    let mut energies = Vec::with_capacity(samples + 1);
    let mut breakdown = Vec::with_capacity(samples + 1);
    let mut channels = Vec::with_capacity(samples + 1);
    let mut x = pack(w0);
    for k in 0..=samples {
        if k > 0 {
            x = &prop * &x;
        }
        let s = StateVector { mode: pencil.mode, coefficients: unpack(x.as_ref()) };
        let e = energy(pencil, &s)?;
        times.push((k * stride) as f64 * dt);
        energies.push(e.total);
        breakdown.push(e.components);
        channels.push(dissipation(pencil, &s)?);
    }
    Ok(SimulationTrace {
        mode: pencil.mode,
        dt,
        stride,
        times,
        energy: energies,
        breakdown,
        dissipation: channels,
        residual: Vec::new(),
        pencil_dissipation: Vec::new(),
        graph_norm_initial,
        final_state: StateVector { mode: pencil.mode, coefficients: unpack(x.as_ref()) },
    })
}

fn matrix_power(a: &Mat<f64>, mut k: usize) -> Mat<f64> {
    let n = a.nrows();
    let mut result: Option<Mat<f64>> = None;
    let mut base = a.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = Some(match result {
                Some(r) => &r * &base,
                None => base.clone(),
            });
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result.unwrap_or_else(|| Mat::identity(n, n))
}

/// `min(h_plate, h_mem)^2 / 4`, reduced further when `beta1 > rho1`.
pub fn default_time_step(grid: &RadialGrid, p: &PhysicalParams) -> f64 {
    let h = grid.h_plate.min(grid.h_mem);
    0.25 * h * h / (p.beta1 / p.rho1).max(1.0)
}

pub const EXPM_DIMENSION_CAP: usize = 400;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn norm1(a: &Mat<f64>) -> f64 {
    (0..a.ncols()).map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn lin(terms: &[(f64, &Mat<f64>)], n: usize) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| terms.iter().map(|(c, m)| c * m[(i, j)]).sum())
}

/// `exp(L)` by scaling and squaring with the degree-13 Pade approximant.
pub fn expm(l: &Mat<f64>) -> Result<Mat<f64>> {
    let n = l.nrows();
    let norm = norm1(l);
    if norm == 0.0 {
        return Ok(Mat::identity(n, n));
    }
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let b = Mat::from_fn(n, n, |i, j| scale * l[(i, j)]);
    let id = Mat::<f64>::identity(n, n);
    let b2 = &b * &b;
    let b4 = &b2 * &b2;
    let b6 = &b4 * &b2;
    let c = &PADE13;
    let inner_u = lin(&[(c[13], &b6), (c[11], &b4), (c[9], &b2)], n);
    let u_poly = &b6 * &inner_u + lin(&[(c[7], &b6), (c[5], &b4), (c[3], &b2), (c[1], &id)], n);
    let u = &b * &u_poly;
    let inner_v = lin(&[(c[12], &b6), (c[10], &b4), (c[8], &b2)], n);
    let v = &b6 * &inner_v + lin(&[(c[6], &b6), (c[4], &b4), (c[2], &b2), (c[0], &id)], n);
    let p = &v + &u;
    let q = &v - &u;
    let f = lu(q.as_ref(), "Pade denominator")?;
    let mut r = f.solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Dense propagator `exp(t M^{-1} A)`.
pub fn matrix_exponential_reference(pencil: &ModePencil, t: f64) -> Result<Mat<f64>> {
    let n = pencil.dim();
    if n > EXPM_DIMENSION_CAP {
        return Err(Error::DimensionCap { cap: EXPM_DIMENSION_CAP, dim: n });
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be nonnegative, got {t}")));
    }
    let f = lu(pencil.m.as_ref(), "mass matrix")?;
    let l = f.solve(&pencil.a);
    expm(&Mat::from_fn(n, n, |i, j| t * l[(i, j)]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    PlateBump,
    MembraneBump,
    ThermalPulse,
    Rough(u64),
}

impl Profile {
    pub fn name(&self) -> String {
        match self {
            Profile::PlateBump => "plate_bump".into(),
            Profile::MembraneBump => "membrane_bump".into(),
            Profile::ThermalPulse => "thermal_pulse".into(),
            Profile::Rough(seed) => format!("rough({seed})"),
        }
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Profile {
    type Err = Error;

    /// Accepts `plate_bump`, `membrane_bump`, `thermal_pulse` and
    /// `rough(<seed>)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "plate_bump" => return Ok(Profile::PlateBump),
            "membrane_bump" => return Ok(Profile::MembraneBump),
            "thermal_pulse" => return Ok(Profile::ThermalPulse),
            _ => {}
        }
        if let Some(inner) = s.strip_prefix("rough(").and_then(|r| r.strip_suffix(')')) {
            if let Ok(seed) = inner.trim().parse() {
                return Ok(Profile::Rough(seed));
            }
        }
        Err(Error::InvalidArgument(format!("unknown profile `{s}`")))
    }
}

/// Polynomial bump `(1 - ((r - c)/w)^2)^4` supported on `|r - c| < w`.
pub fn bump(r: f64, c: f64, w: f64) -> f64 {
    let z = (r - c) / w;
    if z.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - z * z).powi(4)
    }
}

fn rough_stream(seed: u64, mode: i32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mode.unsigned_abs() as u64);
    rng
}

/// Samples a profile, fits it to the reduced unknowns and scales it to unit
/// `G`-norm (energy one half).
pub fn make_initial_data(pencil: &ModePencil, profile: Profile) -> Result<StateVector> {
    let geo = pencil
        .geometry
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("pencil carries no grid".into()))?;
    let grid = &geo.grid;
    let lay = &pencil.layout;
    let mut x = vec![Complex64::new(0.0, 0.0); pencil.dim()];
    let (ri, ro) = (grid.r_interface, grid.r_outer);
    let plate_mid = 0.5 * (ri + ro);
    let plate_w = 0.4 * (ro - ri);

    // Least-squares fit of nodal displacement samples in the plate weights.
    let fit_disp = |samples: &[f64]| -> Result<Vec<f64>> {
        let z = &geo.ops.nodal_u;
        let rhs = Mat::from_fn(z.ncols(), 1, |k, _| {
            (0..z.nrows()).map(|i| z[(i, k)] * grid.plate_weights[i] * samples[i]).sum()
        });
        let f = lu(geo.ops.plate_mass.as_ref(), "plate mass")?;
        let sol = f.solve(&rhs);
        Ok((0..sol.nrows()).map(|k| sol[(k, 0)]).collect())
    };

    match profile {
        Profile::PlateBump if geo.has_plate => {
            let s: Vec<f64> = grid.plate_nodes.iter().map(|&r| bump(r, plate_mid, plate_w)).collect();
            for (i, v) in lay.u.clone().zip(fit_disp(&s)?) {
                x[i] = Complex64::new(v, 0.0);
            }
        }
        Profile::ThermalPulse if geo.has_plate => {
            for (i, &r) in lay.theta.clone().zip(&grid.plate_nodes) {
                x[i] = Complex64::new(bump(r, plate_mid, plate_w), 0.0);
            }
        }
        Profile::MembraneBump => {
            for (i, &r) in lay.v.clone().zip(&grid.membrane_nodes) {
                x[i] = Complex64::new(bump(r, 0.5 * ri, 0.4 * ri), 0.0);
            }
        }
        Profile::Rough(seed) => {
            let mut rng = rough_stream(seed, pencil.mode);
            for z in x.iter_mut() {
                *z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        _ => {}
    }
    let norm_sq = quad(pencil.g.as_ref(), &x);
    if !(norm_sq > 0.0) || !norm_sq.is_finite() {
        return Err(Error::DegenerateProfile(profile.name()));
    }
    let s = 1.0 / norm_sq.sqrt();
    Ok(StateVector { mode: pencil.mode, coefficients: x.into_iter().map(|z| z * s).collect() })
}
