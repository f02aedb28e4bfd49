//! Python bindings for `platemem`.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use platemem::discretization::{assemble_mode_pencil, build_radial_grid};
use platemem::error::Error;
use platemem::lab::{self, ExperimentSettings};
use platemem::model::{self, AnnulusGeometry, PhysicalParams};
use platemem::semigroup::{self, Profile, SimulationTrace, StateVector};
use platemem::spectral;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::EigenFailure { .. } | Error::SingularSystem(_) | Error::Io { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn profile(name: &str) -> PyResult<Profile> {
    name.parse::<Profile>().map_err(to_py)
}

#[pyclass(name = "PhysicalParams", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct PyParams {
    rho0: f64,
    rho1: f64,
    rho2: f64,
    beta0: f64,
    beta1: f64,
    beta2: f64,
    mu: f64,
    gamma: f64,
    rho_damp: f64,
    m_damp: f64,
    kappa: f64,
}

impl From<PhysicalParams> for PyParams {
    fn from(p: PhysicalParams) -> Self {
        Self {
            rho0: p.rho0,
            rho1: p.rho1,
            rho2: p.rho2,
            beta0: p.beta0,
            beta1: p.beta1,
            beta2: p.beta2,
            mu: p.mu,
            gamma: p.gamma,
            rho_damp: p.rho_damp,
            m_damp: p.m_damp,
            kappa: p.kappa,
        }
    }
}

impl PyParams {
    fn inner(&self) -> PhysicalParams {
        PhysicalParams {
            rho0: self.rho0,
            rho1: self.rho1,
            rho2: self.rho2,
            beta0: self.beta0,
            beta1: self.beta1,
            beta2: self.beta2,
            mu: self.mu,
            gamma: self.gamma,
            rho_damp: self.rho_damp,
            m_damp: self.m_damp,
            kappa: self.kappa,
        }
    }
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (*, rho0=1.0, rho1=1.0, rho2=1.0, beta0=1.0, beta1=1.0, beta2=1.0, mu=1.0, gamma=0.0, rho_damp=0.0, m_damp=0.0, kappa=1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        rho0: f64,
        rho1: f64,
        rho2: f64,
        beta0: f64,
        beta1: f64,
        beta2: f64,
        mu: f64,
        gamma: f64,
        rho_damp: f64,
        m_damp: f64,
        kappa: f64,
    ) -> Self {
        Self { rho0, rho1, rho2, beta0, beta1, beta2, mu, gamma, rho_damp, m_damp, kappa }
    }

    /// Unit material constants with the given damping, inertia and coupling.
    #[staticmethod]
    fn unit(m_damp: f64, rho_damp: f64, gamma: f64, mu: f64) -> Self {
        PhysicalParams::unit(m_damp, rho_damp, gamma, mu).into()
    }

    /// Raises `ValueError` naming every offending field.
    #[pyo3(signature = (geometry=None))]
    fn validate(&self, geometry: Option<PyRef<'_, PyGeometry>>) -> PyResult<()> {
        let g = geometry.map(|g| g.inner()).unwrap_or_default();
        model::validate_params(self.inner(), g).map(|_| ()).map_err(to_py)
    }

    #[pyo3(signature = (geometry=None))]
    fn regime(&self, geometry: Option<PyRef<'_, PyGeometry>>) -> String {
        let g = geometry.map(|g| g.inner()).unwrap_or_default();
        model::classify_regime(&self.inner(), &g).as_str().to_string()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner()).replacen("PhysicalParams", "PhysicalParams(", 1).replace(" {", "").replace(" }", ")")
    }
}

#[pyclass(name = "Geometry", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct PyGeometry {
    r_interface: f64,
    r_outer: f64,
    x0: (f64, f64),
}

impl PyGeometry {
    fn inner(&self) -> AnnulusGeometry {
        AnnulusGeometry { r_interface: self.r_interface, r_outer: self.r_outer, x0: [self.x0.0, self.x0.1] }
    }
}

impl From<AnnulusGeometry> for PyGeometry {
    fn from(g: AnnulusGeometry) -> Self {
        Self { r_interface: g.r_interface, r_outer: g.r_outer, x0: (g.x0[0], g.x0[1]) }
    }
}

#[pymethods]
impl PyGeometry {
    #[new]
    #[pyo3(signature = (r_interface=1.0, r_outer=2.0, x0=(0.0, 0.0)))]
    fn new(r_interface: f64, r_outer: f64, x0: (f64, f64)) -> Self {
        Self { r_interface, r_outer, x0 }
    }

    /// `(satisfied, max q.nu)` over `n_theta` interface samples.
    #[pyo3(signature = (n_theta=model::DEFAULT_CONDITION_SAMPLES))]
    fn check_condition(&self, n_theta: usize) -> PyResult<(bool, f64)> {
        let c = model::check_geometric_condition(&self.inner(), n_theta).map_err(to_py)?;
        Ok((c.satisfied, c.max_q_dot_nu))
    }

    fn __repr__(&self) -> String {
        format!("Geometry(r_interface={}, r_outer={}, x0={:?})", self.r_interface, self.r_outer, self.x0)
    }
}

fn trace_dict<'py>(py: Python<'py>, tr: &SimulationTrace) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mode", tr.mode)?;
    d.set_item("dt", tr.dt)?;
    d.set_item("stride", tr.stride)?;
    d.set_item("times", tr.times.clone())?;
    d.set_item("energy", tr.energy.clone())?;
    d.set_item("breakdown", tr.breakdown.iter().map(|b| b.to_vec()).collect::<Vec<_>>())?;
    d.set_item("dissipation", tr.dissipation.iter().map(|b| b.to_vec()).collect::<Vec<_>>())?;
    d.set_item("residual", tr.residual.clone())?;
    d.set_item("max_relative_residual", tr.max_relative_residual())?;
    Ok(d)
}

/// The discrete system of one angular mode.
#[pyclass(name = "ModePencil")]
struct PyPencil {
    inner: platemem::discretization::ModePencil,
    params: PhysicalParams,
}

#[pymethods]
impl PyPencil {
    #[new]
    #[pyo3(signature = (params, n_plate=32, n_mem=32, mode=0, geometry=None))]
    fn new(
        params: PyRef<'_, PyParams>,
        n_plate: usize,
        n_mem: usize,
        mode: i32,
        geometry: Option<PyRef<'_, PyGeometry>>,
    ) -> PyResult<Self> {
        let g = geometry.map(|g| g.inner()).unwrap_or_default();
        let p = params.inner();
        model::validate_params(p, g).map_err(to_py)?;
        let grid = build_radial_grid(&g, n_plate, n_mem, mode).map_err(to_py)?;
        Ok(Self { inner: assemble_mode_pencil(&p, &grid).map_err(to_py)?, params: p })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn mode(&self) -> i32 {
        self.inner.mode
    }

    fn eigenvalues(&self) -> PyResult<Vec<Complex64>> {
        Ok(spectral::eigenvalues(&self.inner).map_err(to_py)?.eigenvalues)
    }

    /// `(abscissa, imag_axis_gap, zero_in_resolvent)`.
    fn spectrum_summary(&self) -> PyResult<(f64, f64, bool)> {
        let s = spectral::eigenvalues(&self.inner).map_err(to_py)?;
        Ok((s.spectral_abscissa, s.imag_axis_gap, s.zero_in_resolvent))
    }

    fn resolvent_norm(&self, lam: f64) -> PyResult<f64> {
        spectral::resolvent_norm(&self.inner, lam).map_err(to_py)
    }

    /// `(lambdas, norms, growth_exponent)`.
    fn resolvent_scan(&self, lmin: f64, lmax: f64, n: usize) -> PyResult<(Vec<f64>, Vec<f64>, Option<f64>)> {
        let s = spectral::resolvent_scan(&self.inner, lmin, lmax, n).map_err(to_py)?;
        Ok((s.lambdas, s.norms, s.growth_exponent))
    }

    fn initial_state(&self, profile_name: &str) -> PyResult<Vec<Complex64>> {
        Ok(semigroup::make_initial_data(&self.inner, profile(profile_name)?).map_err(to_py)?.coefficients)
    }

    /// `(total, [six components])`.
    fn energy(&self, state: Vec<Complex64>) -> PyResult<(f64, Vec<f64>)> {
        let e = semigroup::energy(&self.inner, &StateVector { mode: self.inner.mode, coefficients: state })
            .map_err(to_py)?;
        Ok((e.total, e.components.to_vec()))
    }

    /// Crank-Nicolson trace from a named profile. `dt` defaults to the
    /// grid heuristic.
    #[pyo3(signature = (profile_name="plate_bump", t_end=1.0, dt=None, stride=1))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        profile_name: &str,
        t_end: f64,
        dt: Option<f64>,
        stride: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let x = semigroup::make_initial_data(&self.inner, profile(profile_name)?).map_err(to_py)?;
        let dt = match dt {
            Some(dt) => dt,
            None => semigroup::default_time_step(&self.inner.geometry().map_err(to_py)?.grid, &self.params),
        };
        let tr = if stride == 1 {
            semigroup::simulate(&self.inner, &x, dt, t_end)
        } else {
            semigroup::simulate_strided(&self.inner, &x, dt, t_end, stride)
        }
        .map_err(to_py)?;
        trace_dict(py, &tr)
    }
}

/// Runs the regime experiment and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (params, n_plate=16, n_mem=16, modes=vec![0, 1, 2], profiles=vec!["plate_bump".to_string()], geometry=None, t_end=None, dt=None))]
#[allow(clippy::too_many_arguments)]
fn run_regimes<'py>(
    py: Python<'py>,
    params: PyRef<'_, PyParams>,
    n_plate: usize,
    n_mem: usize,
    modes: Vec<i32>,
    profiles: Vec<String>,
    geometry: Option<PyRef<'_, PyGeometry>>,
    t_end: Option<f64>,
    dt: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let g = geometry.map(|g| g.inner()).unwrap_or_default();
    let profiles = profiles.iter().map(|s| profile(s)).collect::<PyResult<Vec<_>>>()?;
    let mut s = ExperimentSettings::new(n_plate, n_mem, modes, profiles);
    s.t_end = t_end;
    s.dt = dt;
    let p = params.inner();
    let r = py.detach(|| lab::run_regime_experiment(&p, &g, &s)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("predicted", r.predicted.as_str())?;
    d.set_item("verdict", r.verdict.as_str())?;
    d.set_item("exit_code", r.verdict.exit_code())?;
    d.set_item("explanation", r.explanation)?;
    if let Some(sw) = &r.measured.sweep {
        d.set_item("abscissa", (sw.coarse.global, sw.fine.global))?;
        d.set_item("shrink_factor", sw.shrink_factor())?;
    }
    if let Some(sc) = &r.measured.scan {
        d.set_item("scan_sup_norm", sc.sup_norm)?;
        d.set_item("scan_growth_exponent", sc.growth_exponent)?;
    }
    let fits = PyDict::new(py);
    for f in &r.measured.fits {
        fits.set_item(
            f.profile.name(),
            (f.exponential.map(|x| (x.rate, x.r_squared)), f.polynomial.map(|x| (x.rate, x.r_squared))),
        )?;
    }
    d.set_item("fits", fits)?;
    Ok(d)
}

/// Largest real part over the given modes.
#[pyfunction]
#[pyo3(signature = (params, n_plate, n_mem, modes, geometry=None))]
fn global_abscissa(
    params: PyRef<'_, PyParams>,
    n_plate: usize,
    n_mem: usize,
    modes: Vec<i32>,
    geometry: Option<PyRef<'_, PyGeometry>>,
) -> PyResult<f64> {
    let g = geometry.map(|g| g.inner()).unwrap_or_default();
    Ok(spectral::sweep_level(&params.inner(), &g, n_plate, n_mem, &modes).map_err(to_py)?.global)
}

fn synthetic_trace(times: Vec<f64>, energy: Vec<f64>) -> PyResult<SimulationTrace> {
    if times.len() != energy.len() || times.len() < 2 {
        return Err(PyValueError::new_err("times and energy must have equal length >= 2"));
    }
    let n = times.len();
    Ok(SimulationTrace {
        mode: 0,
        dt: times[1] - times[0],
        stride: 1,
        times,
        energy,
        breakdown: vec![[0.0; 6]; n],
        dissipation: vec![[0.0; 4]; n],
        residual: Vec::new(),
        pencil_dissipation: Vec::new(),
        graph_norm_initial: 1.0,
        final_state: StateVector { mode: 0, coefficients: Vec::new() },
    })
}

/// `(delta, r_squared)` for `E ~ C exp(-2 delta t)` over the tail.
#[pyfunction]
#[pyo3(signature = (times, energy, tail_fraction=lab::DEFAULT_TAIL_FRACTION))]
fn fit_exponential(times: Vec<f64>, energy: Vec<f64>, tail_fraction: f64) -> PyResult<(f64, f64)> {
    let f = lab::fit_exponential_rate(&synthetic_trace(times, energy)?, tail_fraction).map_err(to_py)?;
    Ok((f.rate, f.r_squared))
}

/// `(alpha, r_squared)` for `sqrt(2E) ~ C t^-alpha` over the last decade.
#[pyfunction]
fn fit_polynomial(times: Vec<f64>, energy: Vec<f64>) -> PyResult<(f64, f64)> {
    let f = lab::fit_polynomial_rate(&synthetic_trace(times, energy)?).map_err(to_py)?;
    Ok((f.rate, f.r_squared))
}

/// Parses configuration text into `(params, geometry, settings)`.
#[pyfunction]
fn parse_config<'py>(py: Python<'py>, text: &str) -> PyResult<(PyParams, PyGeometry, Bound<'py, PyDict>)> {
    let c = platemem::cli::parse_config(text).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("n_plate", c.n_plate)?;
    d.set_item("n_mem", c.n_mem)?;
    d.set_item("modes", c.modes())?;
    d.set_item("dt", c.dt)?;
    d.set_item("t_end", c.t_end)?;
    d.set_item("profiles", c.profiles.iter().map(|p| p.name()).collect::<Vec<_>>())?;
    d.set_item("output_dir", c.output_dir.to_string_lossy().to_string())?;
    d.set_item("seed", c.seed)?;
    Ok((c.params.into(), c.geometry.into(), d))
}

#[pymodule]
fn platemem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyGeometry>()?;
    m.add_class::<PyPencil>()?;
    m.add_function(wrap_pyfunction!(run_regimes, m)?)?;
    m.add_function(wrap_pyfunction!(global_abscissa, m)?)?;
    m.add_function(wrap_pyfunction!(fit_exponential, m)?)?;
    m.add_function(wrap_pyfunction!(fit_polynomial, m)?)?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    Ok(())
}
