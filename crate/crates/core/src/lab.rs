//! Decay-law fits and end-to-end regime experiments.

use std::fmt;

use rayon::prelude::*;

use crate::discretization::{assemble_mode_pencil, build_radial_grid};
use crate::error::{Error, Result};
use crate::model::{classify_regime, AnnulusGeometry, PhysicalParams, RegimeLabel};
use crate::semigroup::{default_time_step, make_initial_data, simulate_strided, Profile, SimulationTrace};
use crate::spectral::{abscissa_refinement, global_resolvent_scan, AbscissaSweep};

pub const MIN_FIT_SAMPLES: usize = 8;
pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;
pub const DEFAULT_T_END_EXPONENTIAL: f64 = 50.0;
pub const DEFAULT_T_END_POLYNOMIAL: f64 = 500.0;
/// Relative agreement required between a fitted exponential rate and the
/// spectral abscissa, and between resolvent suprema at two resolutions.
pub const RELATIVE_AGREEMENT: f64 = 0.1;
/// Required `|abscissa|` reduction when resolution and mode count double.
pub const SHRINK_THRESHOLD: f64 = 2.0;
pub const POLYNOMIAL_MIN_R2: f64 = 0.95;
/// Samples kept per simulated trace in regime experiments.
pub const TRACE_SAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope * x + intercept`. A constant response
/// is fitted exactly and reports `r^2 = 1`.
pub fn least_squares(pts: &[(f64, f64)]) -> Option<LineFit> {
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Some(LineFit { slope, intercept, r_squared })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    Exponential,
    Polynomial,
}

impl DecayModel {
    pub fn as_str(self) -> &'static str {
        match self {
            DecayModel::Exponential => "exponential",
            DecayModel::Polynomial => "polynomial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub model: DecayModel,
    /// `delta` in `E ~ C e^{-2 delta t}`, or `alpha` in `||w|| ~ C t^{-alpha}`.
    pub rate: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    /// Graph norm of the initial state, for the polynomial law.
    pub normalization: Option<f64>,
}

fn window_points(trace: &SimulationTrace, t_lo: f64, t_hi: f64, log_time: bool) -> Result<Vec<(f64, f64)>> {
    let mut pts = Vec::new();
    for (&t, &e) in trace.times.iter().zip(&trace.energy) {
        if t < t_lo || t > t_hi {
            continue;
        }
        if !(e > 0.0) {
            return Err(Error::NonPositiveEnergy { time: t, value: e });
        }
        if log_time {
            pts.push((t.ln(), 0.5 * (2.0 * e).ln()));
        } else {
            pts.push((t, e.ln()));
        }
    }
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples { min: MIN_FIT_SAMPLES, got: pts.len() });
    }
    Ok(pts)
}

/// Fits `log E` linearly in `t` over the trailing `tail_fraction` of the
/// samples.
pub fn fit_exponential_rate(trace: &SimulationTrace, tail_fraction: f64) -> Result<DecayFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("tail fraction must lie in (0, 1], got {tail_fraction}")));
    }
    let n = trace.times.len();
    let keep = ((n as f64) * tail_fraction).round() as usize;
    if keep < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples { min: MIN_FIT_SAMPLES, got: keep });
    }
    let start = n - keep;
    let (t_lo, t_hi) = (trace.times[start], trace.times[n - 1]);
    let pts = window_points(trace, t_lo, t_hi, false)?;
    let fit = least_squares(&pts).ok_or(Error::TooFewSamples { min: MIN_FIT_SAMPLES, got: pts.len() })?;
    Ok(DecayFit {
        model: DecayModel::Exponential,
        rate: -0.5 * fit.slope,
        prefactor: fit.intercept.exp(),
        r_squared: fit.r_squared,
        window: (t_lo, t_hi),
        normalization: None,
    })
}

/// Fits `log ||w||` with `||w|| = sqrt(2E)` linearly in `log t` over
/// `[t_end / 10, t_end]`.
pub fn fit_polynomial_rate(trace: &SimulationTrace) -> Result<DecayFit> {
    let t_end = trace.times.last().copied().unwrap_or(0.0);
    let t_first = trace.times.iter().copied().find(|&t| t > 0.0).unwrap_or(t_end);
    let t_lo = 0.1 * t_end;
    if !(t_end > 0.0) || t_first > t_lo {
        return Err(Error::WindowTooShort { t_lo: t_first, t_hi: t_end });
    }
    let pts = window_points(trace, t_lo, t_end, true)?;
    let fit = least_squares(&pts).ok_or(Error::TooFewSamples { min: MIN_FIT_SAMPLES, got: pts.len() })?;
    Ok(DecayFit {
        model: DecayModel::Polynomial,
        rate: -fit.slope,
        prefactor: fit.intercept.exp(),
        r_squared: fit.r_squared,
        window: (t_lo, t_end),
        normalization: Some(trace.graph_norm_initial),
    })
}

/// Adds the energies (and channels) of traces sampled at the same times,
/// e.g. the modes of one field. The graph norm is the sum of the modal ones.
pub fn sum_traces(traces: &[SimulationTrace]) -> Result<SimulationTrace> {
    let first = traces.first().ok_or_else(|| Error::InvalidArgument("no traces to sum".into()))?;
    let mut out = first.clone();
    for t in &traces[1..] {
        if t.times.len() != out.times.len() || t.times.iter().zip(&out.times).any(|(a, b)| a != b) {
            return Err(Error::InvalidArgument("traces are sampled at different times".into()));
        }
        for (k, e) in t.energy.iter().enumerate() {
            out.energy[k] += e;
            for c in 0..6 {
                out.breakdown[k][c] += t.breakdown[k][c];
            }
            for c in 0..4 {
                out.dissipation[k][c] += t.dissipation[k][c];
            }
        }
        if t.residual.len() == out.residual.len() {
            for (a, b) in out.residual.iter_mut().zip(&t.residual) {
                *a += b;
            }
            for (a, b) in out.pencil_dissipation.iter_mut().zip(&t.pencil_dissipation) {
                *a += b;
            }
        }
        out.graph_norm_initial += t.graph_norm_initial;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::Inconsistent => "inconsistent",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    /// Process exit status of the `regimes` command.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Consistent => 0,
            Verdict::Inconsistent => 2,
            Verdict::Inconclusive => 3,
        }
    }

    fn worst(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Inconsistent, _) | (_, Inconsistent) => Inconsistent,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Consistent,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Knobs of a regime experiment beyond the physical inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSettings {
    pub n_plate: usize,
    pub n_mem: usize,
    pub modes: Vec<i32>,
    pub profiles: Vec<Profile>,
    /// Defaults to 50 for exponential labels and 500 otherwise.
    pub t_end: Option<f64>,
    /// Defaults to [`default_time_step`] on the mode-0 grid.
    pub dt: Option<f64>,
    /// Scan window; defaults to `[0, sqrt(beta2/rho2) / h_mem]`.
    pub scan_range: Option<(f64, f64)>,
    pub scan_samples: usize,
    pub tail_fraction: f64,
}

impl ExperimentSettings {
    pub fn new(n_plate: usize, n_mem: usize, modes: Vec<i32>, profiles: Vec<Profile>) -> Self {
        Self {
            n_plate,
            n_mem,
            modes,
            profiles,
            t_end: None,
            dt: None,
            scan_range: None,
            scan_samples: 101,
            tail_fraction: DEFAULT_TAIL_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSummary {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub sup_norm: f64,
    /// Same window at doubled resolution.
    pub sup_norm_fine: Option<f64>,
    pub growth_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileFits {
    pub profile: Profile,
    pub exponential: Option<DecayFit>,
    pub polynomial: Option<DecayFit>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Measured {
    pub sweep: Option<AbscissaSweep>,
    pub scan: Option<ScanSummary>,
    pub fits: Vec<ProfileFits>,
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub predicted: RegimeLabel,
    pub measured: Measured,
    pub verdict: Verdict,
    pub explanation: Vec<String>,
}

/// Simulates every mode from the profile at unit modal energy and sums the
/// energies.
pub fn simulate_profile(
    p: &PhysicalParams,
    g: &AnnulusGeometry,
    n_plate: usize,
    n_mem: usize,
    modes: &[i32],
    profile: Profile,
    dt: f64,
    t_end: f64,
) -> Result<SimulationTrace> {
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let stride = (steps / TRACE_SAMPLES).max(1);
    let traces = modes
        .par_iter()
        .map(|&k| {
            let grid = build_radial_grid(g, n_plate, n_mem, k)?;
            let pc = assemble_mode_pencil(p, &grid)?;
            let x = make_initial_data(&pc, profile)?;
            simulate_strided(&pc, &x, dt, t_end, stride)
        })
        .collect::<Result<Vec<_>>>()?;
    sum_traces(&traces)
}

pub fn run_regime_experiment(p: &PhysicalParams, g: &AnnulusGeometry, s: &ExperimentSettings) -> Result<RegimeReport> {
    crate::model::validate_params(*p, *g)?;
    if s.modes.is_empty() || s.profiles.is_empty() {
        return Err(Error::InvalidArgument("experiment needs at least one mode and one profile".into()));
    }
    let predicted = classify_regime(p, g);
    let mut notes = Vec::new();
    let mut measured = Measured::default();

    let n_max = s.modes.iter().copied().max().unwrap_or(0);
    match abscissa_refinement(p, g, s.n_plate, s.n_mem, n_max) {
        Ok(sw) => measured.sweep = Some(sw),
        Err(e) => notes.push(format!("spectral sweep failed: {e}")),
    }

    let h_mem = g.r_interface / s.n_mem as f64;
    let (lmin, lmax) = s.scan_range.unwrap_or((0.0, (p.beta2 / p.rho2).sqrt() / h_mem));
    match global_resolvent_scan(p, g, s.n_plate, s.n_mem, &s.modes, lmin, lmax, s.scan_samples) {
        Ok(coarse) => {
            let sup_norm_fine = if predicted.is_exponential() {
                match global_resolvent_scan(p, g, 2 * s.n_plate, 2 * s.n_mem, &s.modes, lmin, lmax, s.scan_samples) {
                    Ok(f) => Some(f.sup_norm),
                    Err(e) => {
                        notes.push(format!("resolvent scan at doubled resolution failed: {e}"));
                        None
                    }
                }
            } else {
                None
            };
            measured.scan = Some(ScanSummary {
                lambda_min: lmin,
                lambda_max: lmax,
                sup_norm: coarse.sup_norm,
                sup_norm_fine,
                growth_exponent: coarse.growth_exponent,
            });
        }
        Err(e) => notes.push(format!("resolvent scan failed: {e}")),
    }

    let t_end = s.t_end.unwrap_or(if predicted.is_exponential() || predicted == RegimeLabel::StrongOnlyUnproven {
        DEFAULT_T_END_EXPONENTIAL
    } else {
        DEFAULT_T_END_POLYNOMIAL
    });
    let dt = match s.dt {
        Some(dt) => dt,
        None => default_time_step(&build_radial_grid(g, s.n_plate, s.n_mem, 0)?, p),
    };
    measured.dt = dt;
    measured.t_end = t_end;
    for &profile in &s.profiles {
        let mut f = ProfileFits { profile, exponential: None, polynomial: None };
        match simulate_profile(p, g, s.n_plate, s.n_mem, &s.modes, profile, dt, t_end) {
            Ok(trace) => {
                match fit_exponential_rate(&trace, s.tail_fraction) {
                    Ok(x) => f.exponential = Some(x),
                    Err(e) => notes.push(format!("{profile}: exponential fit failed: {e}")),
                }
                match fit_polynomial_rate(&trace) {
                    Ok(x) => f.polynomial = Some(x),
                    Err(e) => notes.push(format!("{profile}: polynomial fit failed: {e}")),
                }
            }
            Err(e) => notes.push(format!("{profile}: simulation failed: {e}")),
        }
        measured.fits.push(f);
    }

    let (verdict, mut lines) = judge(predicted, &measured);
    let verdict = if notes.is_empty() { verdict } else { verdict.worst(Verdict::Inconclusive) };
    notes.append(&mut lines);
    Ok(RegimeReport { predicted, measured, verdict, explanation: notes })
}

/// Applies the verdict rules to measured evidence. Missing evidence makes
/// the verdict inconclusive.
pub fn judge(predicted: RegimeLabel, m: &Measured) -> (Verdict, Vec<String>) {
    let mut v = Verdict::Consistent;
    let mut lines = Vec::new();
    let mut check = |ok: Option<bool>, on_fail: Verdict, what: String, lines: &mut Vec<String>| {
        let (tag, outcome) = match ok {
            Some(true) => ("ok", Verdict::Consistent),
            Some(false) => ("FAILED", on_fail),
            None => ("missing", Verdict::Inconclusive),
        };
        lines.push(format!("[{tag}] {what}"));
        v = v.worst(outcome);
    };
    let coarse = m.sweep.as_ref().map(|s| s.coarse.global);
    let fine = m.sweep.as_ref().map(|s| s.fine.global);

    if predicted.is_exponential() {
        check(
            coarse.zip(fine).map(|(a, b)| a < 0.0 && b < 0.0),
            Verdict::Inconsistent,
            "spectral abscissa negative at both resolutions".into(),
            &mut lines,
        );
        let sup = m.scan.as_ref().and_then(|s| s.sup_norm_fine.map(|f| (s.sup_norm, f)));
        check(
            sup.map(|(c, f)| c.is_finite() && f.is_finite() && (f - c).abs() <= RELATIVE_AGREEMENT * c),
            Verdict::Inconsistent,
            format!("resolvent supremum stable within {RELATIVE_AGREEMENT} under refinement"),
            &mut lines,
        );
        for f in &m.fits {
            let ok = coarse.zip(f.exponential).map(|(a, x)| (x.rate - a.abs()).abs() <= RELATIVE_AGREEMENT * a.abs());
            check(
                ok,
                Verdict::Inconsistent,
                format!("{}: exponential rate within {RELATIVE_AGREEMENT} of |abscissa|", f.profile),
                &mut lines,
            );
        }
    } else if predicted == RegimeLabel::StrongOnlyUnproven {
        // Never inconsistent: the label makes no claim beyond strong stability.
        check(
            coarse.zip(fine).map(|(a, b)| a < 0.0 && b < 0.0),
            Verdict::Inconclusive,
            "no eigenvalue on the imaginary axis (strong stability evidence)".into(),
            &mut lines,
        );
    } else {
        let shrink = m.sweep.as_ref().map(|s| s.shrink_factor());
        check(
            shrink.map(|x| x >= SHRINK_THRESHOLD),
            Verdict::Inconsistent,
            format!("|abscissa| shrinks by at least {SHRINK_THRESHOLD}x when resolution and modes double"),
            &mut lines,
        );
        if predicted == RegimeLabel::NotExponentialPolynomial {
            for f in &m.fits {
                check(
                    f.polynomial.map(|x| x.rate > 0.0 && x.r_squared >= POLYNOMIAL_MIN_R2),
                    Verdict::Inconclusive,
                    format!("{}: polynomial rate positive with r^2 >= {POLYNOMIAL_MIN_R2}", f.profile),
                    &mut lines,
                );
            }
        }
    }
    (v, lines)
}
