//! Configuration files, CSV output and the `platemem` subcommands.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::discretization::{assemble_mode_pencil, build_radial_grid, ModePencil, MIN_NODES};
use crate::error::{Error, Result};
use crate::lab::{run_regime_experiment, ExperimentSettings, RegimeReport};
use crate::model::{check_geometric_condition, validate_params, AnnulusGeometry, PhysicalParams, DEFAULT_CONDITION_SAMPLES};
use crate::semigroup::{default_time_step, make_initial_data, simulate, simulate_strided, Profile, SimulationTrace};
use crate::spectral::{eigenvalues, resolvent_scan, ResolventScan, SpectrumResult};

pub const TRACE_HEADER: &str = "t,energy,E_bend,E_kin_plate,E_rot,E_thermal,E_mem_pot,E_mem_kin,D_struct,D_thermal_bulk,D_thermal_bdry,D_membrane,residual";
pub const SPECTRUM_HEADER: &str = "re,im";
pub const SUMMARY_HEADER: &str = "mode,abscissa,imag_axis_gap,zero_ok";
pub const RESOLVENT_HEADER: &str = "lambda,norm";
pub const FIELD_HEADER: &str = "x,y,value";

pub const DEFAULT_OUTPUT_DIR: &str = "platemem_out";
/// Horizon of `simulate` and `render` when the config sets no `t_end`.
pub const DEFAULT_SIMULATE_T_END: f64 = 1.0;
pub const DEFAULT_RENDER_ANGLES: usize = 64;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub geometry: AnnulusGeometry,
    pub n_plate: usize,
    pub n_mem: usize,
    pub mode_min: i32,
    pub mode_max: i32,
    /// `None` selects [`default_time_step`].
    pub dt: Option<f64>,
    /// `None` selects the per-command default.
    pub t_end: Option<f64>,
    pub profiles: Vec<Profile>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: PhysicalParams { mu: 1.0, gamma: 0.0, rho_damp: 0.0, m_damp: 0.0, ..PhysicalParams::default() },
            geometry: AnnulusGeometry::default(),
            n_plate: 64,
            n_mem: 64,
            mode_min: 0,
            mode_max: 4,
            dt: None,
            t_end: None,
            profiles: vec![Profile::PlateBump],
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn modes(&self) -> Vec<i32> {
        (self.mode_min..=self.mode_max).collect()
    }
}

const KEYS: [&str; 24] = [
    "rho0", "rho1", "rho2", "beta0", "beta1", "beta2", "mu", "gamma", "rho", "m", "kappa", "r_interface", "r_outer",
    "x0_x", "x0_y", "n_plate", "n_mem", "mode_min", "mode_max", "dt", "t_end", "profiles", "output_dir", "seed",
];

fn config_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Config { line, column, message: message.into() }
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are
/// ignored. Columns are 1-based character positions.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    let mut seen = HashSet::new();
    let mut raw_profiles: Option<(usize, usize, String)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let lead = content.len() - content.trim_start().len();
        let Some(eq) = content.find('=') else {
            return Err(config_error(line, lead + 1, "expected `key = value`"));
        };
        let key = content[..eq].trim();
        if key.is_empty() {
            return Err(config_error(line, lead + 1, "missing key before `=`"));
        }
        let key_col = raw[..lead].chars().count() + 1;
        if !KEYS.contains(&key) {
            return Err(config_error(line, key_col, format!("unknown key `{key}`")));
        }
        if !seen.insert(key.to_string()) {
            return Err(config_error(line, key_col, format!("duplicate key `{key}`")));
        }
        let after = &content[eq + 1..];
        let value = after.trim();
        let value_col = raw[..eq + 1 + (after.len() - after.trim_start().len())].chars().count() + 1;
        if value.is_empty() {
            return Err(config_error(line, value_col, format!("missing value for `{key}`")));
        }
        let real = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| config_error(line, value_col, format!("expected a real number for `{key}`, got `{value}`")))
        };
        let count = || -> Result<usize> {
            value.parse::<usize>().map_err(|_| {
                config_error(line, value_col, format!("expected a nonnegative integer for `{key}`, got `{value}`"))
            })
        };
        let integer = || -> Result<i32> {
            value
                .parse::<i32>()
                .map_err(|_| config_error(line, value_col, format!("expected an integer for `{key}`, got `{value}`")))
        };
        let p = &mut c.params;
        match key {
            "rho0" => p.rho0 = real()?,
            "rho1" => p.rho1 = real()?,
            "rho2" => p.rho2 = real()?,
            "beta0" => p.beta0 = real()?,
            "beta1" => p.beta1 = real()?,
            "beta2" => p.beta2 = real()?,
            "mu" => p.mu = real()?,
            "gamma" => p.gamma = real()?,
            "rho" => p.rho_damp = real()?,
            "m" => p.m_damp = real()?,
            "kappa" => p.kappa = real()?,
            "r_interface" => c.geometry.r_interface = real()?,
            "r_outer" => c.geometry.r_outer = real()?,
            "x0_x" => c.geometry.x0[0] = real()?,
            "x0_y" => c.geometry.x0[1] = real()?,
            "n_plate" => c.n_plate = count()?,
            "n_mem" => c.n_mem = count()?,
            "mode_min" => c.mode_min = integer()?,
            "mode_max" => c.mode_max = integer()?,
            "dt" => c.dt = Some(real()?),
            "t_end" => c.t_end = Some(real()?),
            "profiles" => raw_profiles = Some((line, value_col, value.to_string())),
            "output_dir" => c.output_dir = PathBuf::from(value),
            "seed" => {
                c.seed = value.parse::<u64>().map_err(|_| {
                    config_error(line, value_col, format!("expected a nonnegative integer for `seed`, got `{value}`"))
                })?
            }
            _ => unreachable!("key list and match arms agree"),
        }
    }
    if let Some((line, col, list)) = raw_profiles {
        c.profiles = parse_profiles(&list, c.seed).map_err(|(off, msg)| config_error(line, col + off, msg))?;
    }
    validate_config(&c)?;
    Ok(c)
}

/// Comma-separated profile names; a bare `rough` takes the config seed.
/// Errors carry the character offset of the bad entry.
fn parse_profiles(list: &str, seed: u64) -> std::result::Result<Vec<Profile>, (usize, String)> {
    let mut out = Vec::new();
    let mut offset = 0;
    for part in list.split(',') {
        let name = part.trim();
        let at = offset + part.chars().count() - part.trim_start().chars().count();
        let profile = if name == "rough" { Ok(Profile::Rough(seed)) } else { name.parse::<Profile>() };
        match profile {
            Ok(p) => out.push(p),
            Err(_) => return Err((at, format!("unknown profile `{name}`"))),
        }
        offset += part.chars().count() + 1;
    }
    Ok(out)
}

fn validate_config(c: &RunConfig) -> Result<()> {
    validate_params(c.params, c.geometry)?;
    if c.n_plate < MIN_NODES {
        return Err(Error::GridTooSmall { what: "n_plate", min: MIN_NODES, got: c.n_plate });
    }
    if c.n_mem < MIN_NODES {
        return Err(Error::GridTooSmall { what: "n_mem", min: MIN_NODES, got: c.n_mem });
    }
    if c.mode_min < 0 || c.mode_max < c.mode_min {
        return Err(Error::InvalidArgument(format!(
            "mode range must satisfy 0 <= mode_min <= mode_max, got {}..{}",
            c.mode_min, c.mode_max
        )));
    }
    for (name, v) in [("dt", c.dt), ("t_end", c.t_end)] {
        if let Some(v) = v {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be finite and > 0, got {v}")));
            }
        }
    }
    Ok(())
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

/// Seventeen significant digits: lossless for `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_line(out: &mut String, fields: impl IntoIterator<Item = String>) {
    let mut first = true;
    for f in fields {
        if !first {
            out.push(',');
        }
        out.push_str(&f);
        first = false;
    }
    out.push('\n');
}

pub fn csv_text(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = String::with_capacity(1 << 12);
    s.push_str(header);
    s.push('\n');
    for r in rows {
        csv_line(&mut s, r);
    }
    s
}

/// Splits CSV text into its header and rows.
pub fn parse_csv(text: &str) -> Result<(String, Vec<Vec<String>>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::InvalidArgument("empty CSV".into()))?.to_string();
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (k, l) in lines.enumerate() {
        let row: Vec<String> = l.split(',').map(str::to_string).collect();
        if row.len() != width {
            return Err(config_error(k + 2, 1, format!("expected {width} fields, found {}", row.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Re-reads CSV text and emits it again, reformatting every numeric field.
pub fn reemit_csv(text: &str) -> Result<String> {
    let (header, rows) = parse_csv(text)?;
    Ok(csv_text(
        &header,
        rows.into_iter().map(|r| {
            r.into_iter()
                .map(|f| match f.parse::<f64>() {
                    Ok(x) if f.contains(['.', 'e', 'E', 'N', 'n']) => format_float(x),
                    _ => f,
                })
                .collect()
        }),
    ))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn trace_csv(trace: &SimulationTrace) -> String {
    csv_text(
        TRACE_HEADER,
        (0..trace.len()).map(|k| {
            let mut row = Vec::with_capacity(13);
            row.push(format_float(trace.times[k]));
            row.push(format_float(trace.energy[k]));
            row.extend(trace.breakdown[k].iter().map(|&x| format_float(x)));
            row.extend(trace.dissipation[k].iter().map(|&x| format_float(x)));
            row.push(format_float(trace.residual.get(k).copied().unwrap_or(0.0)));
            row
        }),
    )
}

pub fn spectrum_csv(s: &SpectrumResult) -> String {
    csv_text(SPECTRUM_HEADER, s.eigenvalues.iter().map(|z| vec![format_float(z.re), format_float(z.im)]))
}

pub fn summary_csv(spectra: &[SpectrumResult]) -> String {
    csv_text(
        SUMMARY_HEADER,
        spectra.iter().map(|s| {
            vec![
                s.mode.to_string(),
                format_float(s.spectral_abscissa),
                format_float(s.imag_axis_gap),
                s.zero_in_resolvent.to_string(),
            ]
        }),
    )
}

pub fn resolvent_csv(scan: &ResolventScan) -> String {
    csv_text(
        RESOLVENT_HEADER,
        scan.lambdas.iter().zip(&scan.norms).map(|(l, n)| vec![format_float(*l), format_float(*n)]),
    )
}

fn mode_pencil(c: &RunConfig, mode: i32) -> Result<ModePencil> {
    let grid = build_radial_grid(&c.geometry, c.n_plate, c.n_mem, mode)?;
    assemble_mode_pencil(&c.params, &grid)
}

fn time_step(c: &RunConfig, pencil: &ModePencil) -> Result<f64> {
    match c.dt {
        Some(dt) => Ok(dt),
        None => Ok(default_time_step(&pencil.geometry()?.grid, &c.params)),
    }
}

/// Directory for one profile's traces: the output directory itself when
/// there is a single profile.
fn profile_dir(c: &RunConfig, profile: Profile) -> PathBuf {
    if c.profiles.len() == 1 {
        c.output_dir.clone()
    } else {
        let name: String =
            profile.name().chars().map(|ch| if ch.is_ascii_alphanumeric() || ch == '_' { ch } else { '_' }).collect();
        c.output_dir.join(name.trim_end_matches('_'))
    }
}

pub fn run_simulate(c: &RunConfig) -> Result<String> {
    let t_end = c.t_end.unwrap_or(DEFAULT_SIMULATE_T_END);
    let jobs: Vec<(Profile, i32)> = c.profiles.iter().flat_map(|&p| c.modes().into_iter().map(move |k| (p, k))).collect();
    let traces = jobs
        .par_iter()
        .map(|&(profile, k)| {
            let pc = mode_pencil(c, k)?;
            let x = make_initial_data(&pc, profile)?;
            simulate(&pc, &x, time_step(c, &pc)?, t_end)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = String::new();
    for (&(profile, k), tr) in jobs.iter().zip(&traces) {
        let dir = profile_dir(c, profile);
        ensure_dir(&dir)?;
        write_file(&dir.join(format!("trace_mode{k}.csv")), &trace_csv(tr))?;
        let _ = writeln!(
            out,
            "{profile} mode {k}: {} steps, dt {}, E(0) {}, E(t_end) {}, max |r| dt/E0 {}",
            tr.len() - 1,
            format_float(tr.dt),
            format_float(tr.energy[0]),
            format_float(*tr.energy.last().unwrap_or(&0.0)),
            format_float(tr.max_relative_residual())
        );
    }
    Ok(out)
}

pub fn run_spectrum(c: &RunConfig) -> Result<String> {
    let spectra =
        c.modes().par_iter().map(|&k| eigenvalues(&mode_pencil(c, k)?)).collect::<Result<Vec<SpectrumResult>>>()?;
    ensure_dir(&c.output_dir)?;
    let mut out = String::new();
    for s in &spectra {
        write_file(&c.output_dir.join(format!("spectrum_mode{}.csv", s.mode)), &spectrum_csv(s))?;
        let _ = writeln!(
            out,
            "mode {}: abscissa {}, imag_axis_gap {}, zero_ok {}",
            s.mode,
            format_float(s.spectral_abscissa),
            format_float(s.imag_axis_gap),
            s.zero_in_resolvent
        );
    }
    write_file(&c.output_dir.join("spectrum_summary.csv"), &summary_csv(&spectra))?;
    let global = spectra.iter().map(|s| s.spectral_abscissa).fold(f64::NEG_INFINITY, f64::max);
    let _ = writeln!(out, "global abscissa {}", format_float(global));
    Ok(out)
}

pub fn run_scan(c: &RunConfig, lmin: f64, lmax: f64, n: usize) -> Result<String> {
    let scans = c
        .modes()
        .par_iter()
        .map(|&k| resolvent_scan(&mode_pencil(c, k)?, lmin, lmax, n))
        .collect::<Result<Vec<ResolventScan>>>()?;
    ensure_dir(&c.output_dir)?;
    let mut out = String::new();
    for s in &scans {
        write_file(&c.output_dir.join(format!("resolvent_mode{}.csv", s.mode)), &resolvent_csv(s))?;
        let _ = writeln!(out, "mode {}: sup norm {}, growth exponent {}", s.mode, format_float(s.sup_norm), opt(s.growth_exponent));
    }
    // Envelope over modes, as in the global scan.
    let mut merged: Vec<(f64, f64)> =
        scans.iter().flat_map(|s| s.lambdas.iter().copied().zip(s.norms.iter().copied())).collect();
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lam: Vec<f64> = merged.iter().map(|m| m.0).collect();
    let nrm: Vec<f64> = merged.iter().map(|m| m.1).collect();
    let e = crate::spectral::peak_growth_exponent(&lam, &nrm, 0.5 * (lmin + lmax));
    let _ = writeln!(out, "growth_exponent = {}", opt(e));
    Ok(out)
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_else(|| "none".into())
}

pub fn report_text(r: &RegimeReport, c: &RunConfig) -> String {
    let mut s = String::new();
    let m = &r.measured;
    let _ = writeln!(s, "predicted: {}", r.predicted);
    let _ = writeln!(s, "resolution: n_plate={} n_mem={} modes={}..{}", c.n_plate, c.n_mem, c.mode_min, c.mode_max);
    if let Some(sw) = &m.sweep {
        for level in [&sw.coarse, &sw.fine] {
            let _ = writeln!(
                s,
                "abscissa n_plate={} n_mem={} modes=0..{}: {}",
                level.n_plate,
                level.n_mem,
                level.modes.last().copied().unwrap_or(0),
                format_float(level.global)
            );
        }
        let _ = writeln!(s, "abscissa_shrink_factor: {}", format_float(sw.shrink_factor()));
    }
    if let Some(sc) = &m.scan {
        let _ = writeln!(s, "scan_window: [{}, {}]", format_float(sc.lambda_min), format_float(sc.lambda_max));
        let _ = writeln!(s, "scan_sup_norm: {}", format_float(sc.sup_norm));
        let _ = writeln!(s, "scan_sup_norm_doubled_resolution: {}", opt(sc.sup_norm_fine));
        let _ = writeln!(s, "scan_growth_exponent: {}", opt(sc.growth_exponent));
    }
    let _ = writeln!(s, "dt: {}", format_float(m.dt));
    let _ = writeln!(s, "t_end: {}", format_float(m.t_end));
    for f in &m.fits {
        if let Some(x) = f.exponential {
            let _ = writeln!(s, "fit {} exponential: rate={} r2={}", f.profile, format_float(x.rate), format_float(x.r_squared));
        }
        if let Some(x) = f.polynomial {
            let _ = writeln!(s, "fit {} polynomial: alpha={} r2={}", f.profile, format_float(x.rate), format_float(x.r_squared));
        }
    }
    let _ = writeln!(s, "verdict: {}", r.verdict);
    for l in &r.explanation {
        let _ = writeln!(s, "  {l}");
    }
    s
}

pub fn run_regimes(c: &RunConfig) -> Result<(RegimeReport, String)> {
    let mut settings = ExperimentSettings::new(c.n_plate, c.n_mem, c.modes(), c.profiles.clone());
    settings.t_end = c.t_end;
    settings.dt = c.dt;
    let report = run_regime_experiment(&c.params, &c.geometry, &settings)?;
    let text = report_text(&report, c);
    ensure_dir(&c.output_dir)?;
    write_file(&c.output_dir.join("regime_report.txt"), &text)?;
    Ok((report, text))
}

pub fn run_check_geometry(c: &RunConfig) -> Result<String> {
    let gc = check_geometric_condition(&c.geometry, DEFAULT_CONDITION_SAMPLES)?;
    let word = if gc.satisfied { "satisfied" } else { "violated" };
    // Shortest representation that reads back to the same double.
    Ok(format!("{word}, max q·nu = {}\n", gc.max_q_dot_nu))
}

/// Modal state of the first profile at time `t`; the step is shrunk so that
/// an integer number of steps lands on `t`.
fn state_at(c: &RunConfig, pc: &ModePencil, t: f64) -> Result<Vec<Complex64>> {
    let profile = *c.profiles.first().ok_or_else(|| Error::InvalidArgument("no profile".into()))?;
    let x = make_initial_data(pc, profile)?;
    if t == 0.0 {
        return Ok(x.coefficients);
    }
    let dt = time_step(c, pc)?;
    let steps = (t / dt).ceil().max(1.0) as usize;
    Ok(simulate_strided(pc, &x, t / steps as f64, t, steps)?.final_state.coefficients)
}

/// Sums `Re(c_n(r) e^{i n phi})` over the configured modes on the
/// membrane and plate nodes. `u` and `theta` vanish on the membrane, `v`
/// on the plate.
pub fn run_render(c: &RunConfig, t: f64, n_angles: usize) -> Result<String> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("render time must be finite and >= 0, got {t}")));
    }
    if n_angles == 0 {
        return Err(Error::InvalidArgument("need at least one angle".into()));
    }
    let per_mode = c
        .modes()
        .par_iter()
        .map(|&k| {
            let pc = mode_pencil(c, k)?;
            let f = pc.reconstruct(&state_at(c, &pc, t)?)?;
            Ok((k, f.u_nodes().to_vec(), f.theta_nodes().to_vec(), f.v_nodes().to_vec()))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = build_radial_grid(&c.geometry, c.n_plate, c.n_mem, 0)?;
    let zero = Complex64::new(0.0, 0.0);
    let mut fields = [String::new(), String::new(), String::new()];
    for f in fields.iter_mut() {
        f.push_str(FIELD_HEADER);
        f.push('\n');
    }
    let radii: Vec<(f64, Option<usize>, Option<usize>)> = grid
        .membrane_nodes
        .iter()
        .enumerate()
        .map(|(j, &r)| (r, None, Some(j)))
        .chain(grid.plate_nodes.iter().enumerate().map(|(i, &r)| (r, Some(i), None)))
        .collect();
    for a in 0..n_angles {
        let phi = 2.0 * std::f64::consts::PI * a as f64 / n_angles as f64;
        for &(r, plate, mem) in &radii {
            let mut vals = [0.0; 3];
            for (k, u, th, v) in &per_mode {
                let e = Complex64::from_polar(1.0, *k as f64 * phi);
                let pick = |xs: &Vec<Complex64>, idx: Option<usize>| idx.map(|i| xs[i]).unwrap_or(zero);
                vals[0] += (pick(u, plate) * e).re;
                vals[1] += (pick(th, plate) * e).re;
                vals[2] += (pick(v, mem) * e).re;
            }
            let (x, y) = (r * phi.cos(), r * phi.sin());
            for (f, val) in fields.iter_mut().zip(vals) {
                csv_line(f, [format_float(x), format_float(y), format_float(val)]);
            }
        }
    }
    ensure_dir(&c.output_dir)?;
    for (name, text) in ["u", "theta", "v"].iter().zip(&fields) {
        write_file(&c.output_dir.join(format!("field_{name}.csv")), text)?;
    }
    Ok(format!("rendered {} modes at t = {} on {} x {} points\n", per_mode.len(), format_float(t), radii.len(), n_angles))
}

#[derive(Debug, Parser)]
#[command(name = "platemem", version, about = "Thermoelastic plate and membrane transmission problem on concentric disks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crank-Nicolson energy traces per mode and profile.
    Simulate { config: PathBuf },
    /// Pencil spectra and the per-mode summary.
    Spectrum { config: PathBuf },
    /// Energy-norm resolvent along the imaginary axis.
    Scan {
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lmin: f64,
        #[arg(long, allow_hyphen_values = true)]
        lmax: f64,
        #[arg(long)]
        n: usize,
    },
    /// Predicted regime against measured evidence; exit 0/2/3 for
    /// consistent/inconsistent/inconclusive.
    Regimes { config: PathBuf },
    /// Multiplier condition on the interface.
    CheckGeometry { config: PathBuf },
    /// Two-dimensional fields of the first profile at time `t`.
    Render {
        config: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = DEFAULT_RENDER_ANGLES)]
        n_angles: usize,
    },
}

/// Caps rayon's global pool from `PLATEMEM_THREADS`.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("PLATEMEM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("PLATEMEM_THREADS must be a positive integer, got `{v}`")))?;
    // A pool may already exist when called twice in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs a parsed command and returns the process exit code. Summaries go
/// to standard output, errors to standard error.
pub fn execute(cli: Cli) -> i32 {
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Simulate { config } => run_simulate(&read_config(&config)?).map(|s| (s, EXIT_OK)),
        Command::Spectrum { config } => run_spectrum(&read_config(&config)?).map(|s| (s, EXIT_OK)),
        Command::Scan { config, lmin, lmax, n } => run_scan(&read_config(&config)?, lmin, lmax, n).map(|s| (s, EXIT_OK)),
        Command::Regimes { config } => {
            run_regimes(&read_config(&config)?).map(|(r, text)| (text, r.verdict.exit_code()))
        }
        Command::CheckGeometry { config } => run_check_geometry(&read_config(&config)?).map(|s| (s, EXIT_OK)),
        Command::Render { config, t, n_angles } => {
            run_render(&read_config(&config)?, t, n_angles).map(|s| (s, EXIT_OK))
        }
    });
    match result {
        Ok((text, code)) => {
            print!("{text}");
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Entry point for argument vectors; usage errors exit with 1 so that 2 and
/// 3 stay reserved for regime verdicts.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
        assert_eq!(parse_config("# only a comment\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn values_and_comments() {
        let c = parse_config("m = 1\nrho = 1   # damped\nprofiles = plate_bump, rough(3)\nseed = 9\nmode_max = 2\n").unwrap();
        assert_eq!(c.params.m_damp, 1.0);
        assert_eq!(c.params.rho_damp, 1.0);
        assert_eq!(c.profiles, vec![Profile::PlateBump, Profile::Rough(3)]);
        assert_eq!(c.seed, 9);
        assert_eq!(c.modes(), vec![0, 1, 2]);
        let c = parse_config("seed = 4\nprofiles = rough\n").unwrap();
        assert_eq!(c.profiles, vec![Profile::Rough(4)]);
    }

    #[test]
    fn error_positions() {
        let e = parse_config("m = 1\n  bogus = 3\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, column: 3, .. }), "{e}");
        let e = parse_config("mu = 1\nmu = 2\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, column: 1, .. }), "{e}");
        let e = parse_config("\n\nkappa =  abc\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, column: 10, .. }), "{e}");
        let e = parse_config("n_plate 12\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, column: 1, .. }), "{e}");
        let e = parse_config("profiles = plate_bump,  wobble\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, column: 25, .. }), "{e}");
        let e = parse_config("n_mem = -3\n").unwrap_err();
        assert!(e.to_string().starts_with("line 1, column 9:"), "{e}");
    }

    #[test]
    fn validation_names_the_field() {
        let e = parse_config("beta1 = -1\n").unwrap_err();
        assert!(matches!(e, Error::InvalidParameters(_)));
        assert!(e.to_string().contains("beta1"));
        assert!(parse_config("n_plate = 4\n").is_err());
        assert!(parse_config("mode_min = 3\nmode_max = 1\n").is_err());
        assert!(parse_config("dt = 0\n").is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, -1.0, 1.0 / 3.0, 6.02214076e23, -2.5e-310, f64::MAX] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_float(-1.0), "-1.0000000000000000e0");
    }

    #[test]
    fn csv_reemit_is_identity() {
        let text = csv_text("mode,abscissa,zero_ok", vec![vec!["3".into(), format_float(-0.1), "true".into()]]);
        assert_eq!(reemit_csv(&text).unwrap(), text);
        assert!(parse_csv("a,b\n1\n").is_err());
    }
}
