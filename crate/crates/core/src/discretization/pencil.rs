use std::ops::Range;

use faer::Mat;
use num_complex::Complex64;

use super::grid::RadialGrid;
use super::operators::{build_mode_operators, laplacian_mode, Domain, ModeOperators, GHOSTS};
use crate::error::{Error, Result};
use crate::linalg::{checked_cholesky, diag};
use crate::model::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    U,
    Ut,
    Theta,
    V,
    Vt,
}

impl Field {
    pub const ALL: [Field; 5] = [Field::U, Field::Ut, Field::Theta, Field::V, Field::Vt];

    pub fn name(self) -> &'static str {
        match self {
            Field::U => "u",
            Field::Ut => "u_t",
            Field::Theta => "theta",
            Field::V => "v",
            Field::Vt => "v_t",
        }
    }
}

/// Contiguous index ranges of the five fields in a state vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofLayout {
    pub u: Range<usize>,
    pub u_t: Range<usize>,
    pub theta: Range<usize>,
    pub v: Range<usize>,
    pub v_t: Range<usize>,
}

impl DofLayout {
    pub fn new(n_disp: usize, n_theta: usize, n_mem: usize) -> Self {
        let u = 0..n_disp;
        let u_t = u.end..u.end + n_disp;
        let theta = u_t.end..u_t.end + n_theta;
        let v = theta.end..theta.end + n_mem;
        let v_t = v.end..v.end + n_mem;
        Self { u, u_t, theta, v, v_t }
    }

    pub fn dim(&self) -> usize {
        self.v_t.end
    }

    pub fn range(&self, f: Field) -> Range<usize> {
        match f {
            Field::U => self.u.clone(),
            Field::Ut => self.u_t.clone(),
            Field::Theta => self.theta.clone(),
            Field::V => self.v.clone(),
            Field::Vt => self.v_t.clone(),
        }
    }
}

/// A quadratic form acting on the entries `index` of a state vector.
#[derive(Debug, Clone)]
pub struct SubForm {
    pub index: Vec<usize>,
    pub mat: Mat<f64>,
}

impl SubForm {
    pub fn new(index: Vec<usize>, mat: Mat<f64>) -> Self {
        assert_eq!(index.len(), mat.nrows());
        Self { index, mat }
    }

    pub fn on_range(r: Range<usize>, mat: Mat<f64>) -> Self {
        Self::new(r.collect(), mat)
    }

    pub fn empty() -> Self {
        Self { index: Vec::new(), mat: Mat::zeros(0, 0) }
    }

    /// `x^* B x` restricted to the form's entries.
    pub fn eval(&self, x: &[Complex64]) -> f64 {
        let n = self.index.len();
        let mut s = 0.0;
        for a in 0..n {
            let xa = x[self.index[a]];
            if xa == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut row = Complex64::new(0.0, 0.0);
            for b in 0..n {
                row += self.mat[(a, b)] * x[self.index[b]];
            }
            s += (xa.conj() * row).re;
        }
        s
    }

    /// Embeds the form into a `dim x dim` matrix.
    pub fn embed(&self, dim: usize) -> Mat<f64> {
        let mut m = Mat::zeros(dim, dim);
        for (a, &i) in self.index.iter().enumerate() {
            for (b, &j) in self.index.iter().enumerate() {
                m[(i, j)] += self.mat[(a, b)];
            }
        }
        m
    }
}

pub const ENERGY_TERMS: [&str; 6] = ["E_bend", "E_kin_plate", "E_rot", "E_thermal", "E_mem_pot", "E_mem_kin"];
pub const DISSIPATION_TERMS: [&str; 4] = ["D_struct", "D_thermal_bulk", "D_thermal_bdry", "D_membrane"];

/// Per-mode generator pencil `M w' = A w` with the energy Gram matrix `G`.
#[derive(Debug, Clone)]
pub struct ModePencil {
    pub mode: i32,
    pub m: Mat<f64>,
    pub a: Mat<f64>,
    pub g: Mat<f64>,
    pub layout: DofLayout,
    /// Six energy terms, in the order of [`ENERGY_TERMS`]; they sum to `G`.
    pub energy_forms: Vec<SubForm>,
    /// Four physical dissipation channels, in the order of
    /// [`DISSIPATION_TERMS`].
    pub dissipation_forms: Vec<SubForm>,
    /// Grid and ghost maps, absent for synthetic pencils.
    pub geometry: Option<PencilGeometry>,
}

#[derive(Debug, Clone)]
pub struct PencilGeometry {
    pub grid: RadialGrid,
    pub ops: ModeOperators,
    pub params: PhysicalParams,
    /// Whether the plate and temperature unknowns are present.
    pub has_plate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PencilOptions {
    /// Keep the `beta0` heat-conduction terms. Switching them off gives the
    /// conservative test limit together with `rho = m = mu = 0`.
    pub thermal_diffusion: bool,
}

impl Default for PencilOptions {
    fn default() -> Self {
        Self { thermal_diffusion: true }
    }
}

fn put(dst: &mut Mat<f64>, rows: Range<usize>, cols: Range<usize>, src: &Mat<f64>, scale: f64) {
    assert_eq!(rows.len(), src.nrows());
    assert_eq!(cols.len(), src.ncols());
    for (a, i) in rows.clone().enumerate() {
        for (b, j) in cols.clone().enumerate() {
            dst[(i, j)] += scale * src[(a, b)];
        }
    }
}

fn sub(m: &Mat<f64>, rows: Range<usize>, cols: Range<usize>) -> Mat<f64> {
    m.as_ref().subrows(rows.start, rows.len()).subcols(cols.start, cols.len()).to_owned()
}

fn scaled(m: &Mat<f64>, s: f64) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| s * m[(i, j)])
}

pub fn assemble_mode_pencil(p: &PhysicalParams, grid: &RadialGrid) -> Result<ModePencil> {
    assemble_mode_pencil_with(p, grid, PencilOptions::default())
}

pub fn assemble_mode_pencil_with(p: &PhysicalParams, grid: &RadialGrid, opts: PencilOptions) -> Result<ModePencil> {
    let ops = build_mode_operators(grid, p.kappa)?;
    let n = grid.n_plate();
    let nm = grid.n_mem();
    let nr = n - 1;
    let lay = DofLayout::new(nr, n, nm);
    let dim = lay.dim();

    let wp = diag(&grid.plate_weights);
    let sm_uu = sub(&ops.membrane_grad, 0..nr, 0..nr);
    let sm_uv = sub(&ops.membrane_grad, 0..nr, nr..nr + nm);
    let sm_vu = sub(&ops.membrane_grad, nr..nr + nm, 0..nr);
    let sm_vv = sub(&ops.membrane_grad, nr..nr + nm, nr..nr + nm);
    let mut kin = scaled(&ops.plate_mass, p.rho1);
    put(&mut kin, 0..nr, 0..nr, &ops.plate_grad, p.gamma);
    let beta0 = if opts.thermal_diffusion { p.beta0 } else { 0.0 };
    let thermal = {
        let mut t = ops.thermal_grad.clone();
        put(&mut t, 0..n, 0..n, &ops.thermal_boundary, 1.0);
        t
    };

    let mut m = Mat::zeros(dim, dim);
    put(&mut m, lay.u.clone(), lay.u.clone(), &ops.plate_mass, 1.0);
    put(&mut m, lay.u_t.clone(), lay.u_t.clone(), &kin, 1.0);
    put(&mut m, lay.theta.clone(), lay.theta.clone(), &wp, p.rho0);
    put(&mut m, lay.v.clone(), lay.v.clone(), &ops.membrane_mass, 1.0);
    put(&mut m, lay.v_t.clone(), lay.v_t.clone(), &ops.membrane_mass, p.rho2);

    let mut a = Mat::zeros(dim, dim);
    put(&mut a, lay.u.clone(), lay.u_t.clone(), &ops.plate_mass, 1.0);
    put(&mut a, lay.u_t.clone(), lay.u.clone(), &ops.bending, -p.beta1);
    put(&mut a, lay.u_t.clone(), lay.u.clone(), &sm_uu, -p.beta2);
    put(&mut a, lay.u_t.clone(), lay.v.clone(), &sm_uv, -p.beta2);
    put(&mut a, lay.u_t.clone(), lay.u_t.clone(), &ops.plate_grad, -p.rho_damp);
    put(&mut a, lay.u_t.clone(), lay.theta.clone(), &ops.coupling.transpose().to_owned(), -p.mu);
    put(&mut a, lay.theta.clone(), lay.u_t.clone(), &ops.coupling, p.mu);
    put(&mut a, lay.theta.clone(), lay.theta.clone(), &thermal, -beta0);
    put(&mut a, lay.v.clone(), lay.v_t.clone(), &ops.membrane_mass, 1.0);
    put(&mut a, lay.v_t.clone(), lay.u.clone(), &sm_vu, -p.beta2);
    put(&mut a, lay.v_t.clone(), lay.v.clone(), &sm_vv, -p.beta2);
    put(&mut a, lay.v_t.clone(), lay.v_t.clone(), &ops.membrane_mass, -p.m_damp);

    let uv: Vec<usize> = lay.u.clone().chain(lay.v.clone()).collect();
    let energy_forms = vec![
        SubForm::on_range(lay.u.clone(), scaled(&ops.bending, p.beta1)),
        SubForm::on_range(lay.u_t.clone(), scaled(&ops.plate_mass, p.rho1)),
        SubForm::on_range(lay.u_t.clone(), scaled(&ops.plate_grad, p.gamma)),
        SubForm::on_range(lay.theta.clone(), scaled(&wp, p.rho0)),
        SubForm::new(uv, scaled(&ops.membrane_grad, p.beta2)),
        SubForm::on_range(lay.v_t.clone(), scaled(&ops.membrane_mass, p.rho2)),
    ];
    let dissipation_forms = vec![
        SubForm::on_range(lay.u_t.clone(), scaled(&ops.plate_grad, p.rho_damp)),
        SubForm::on_range(lay.theta.clone(), scaled(&ops.thermal_grad, beta0)),
        SubForm::on_range(lay.theta.clone(), scaled(&ops.thermal_boundary, beta0)),
        SubForm::on_range(lay.v_t.clone(), scaled(&ops.membrane_mass, p.m_damp)),
    ];
    let g = gram_from_forms(&energy_forms, dim);

    let pencil = ModePencil {
        mode: grid.mode,
        m,
        a,
        g,
        layout: lay,
        energy_forms,
        dissipation_forms,
        geometry: Some(PencilGeometry { grid: grid.clone(), ops, params: *p, has_plate: true }),
    };
    Ok(pencil)
}

/// Energy Gram matrix `G` of a mode; its quadratic form is twice the energy.
pub fn gram_matrix(p: &PhysicalParams, grid: &RadialGrid) -> Result<Mat<f64>> {
    Ok(assemble_mode_pencil(p, grid)?.g)
}

fn gram_from_forms(forms: &[SubForm], dim: usize) -> Mat<f64> {
    let mut g = Mat::zeros(dim, dim);
    for f in forms {
        for (a, &i) in f.index.iter().enumerate() {
            for (b, &j) in f.index.iter().enumerate() {
                g[(i, j)] += f.mat[(a, b)];
            }
        }
    }
    crate::linalg::symmetrize(&g)
}

/// The membrane alone with the plate held at rest: `v = 0` on the interface.
/// Plate and temperature blocks have size zero.
pub fn membrane_subpencil(p: &PhysicalParams, grid: &RadialGrid) -> Result<ModePencil> {
    let ops = build_mode_operators(grid, p.kappa)?;
    let nr = grid.n_plate() - 1;
    let nm = grid.n_mem();
    let lay = DofLayout::new(0, 0, nm);
    let dim = lay.dim();
    let svv = sub(&ops.membrane_grad, nr..nr + nm, nr..nr + nm);
    let mut m = Mat::zeros(dim, dim);
    put(&mut m, lay.v.clone(), lay.v.clone(), &ops.membrane_mass, 1.0);
    put(&mut m, lay.v_t.clone(), lay.v_t.clone(), &ops.membrane_mass, p.rho2);
    let mut a = Mat::zeros(dim, dim);
    put(&mut a, lay.v.clone(), lay.v_t.clone(), &ops.membrane_mass, 1.0);
    put(&mut a, lay.v_t.clone(), lay.v.clone(), &svv, -p.beta2);
    put(&mut a, lay.v_t.clone(), lay.v_t.clone(), &ops.membrane_mass, -p.m_damp);
    let energy_forms = vec![
        SubForm::empty(),
        SubForm::empty(),
        SubForm::empty(),
        SubForm::empty(),
        SubForm::on_range(lay.v.clone(), scaled(&svv, p.beta2)),
        SubForm::on_range(lay.v_t.clone(), scaled(&ops.membrane_mass, p.rho2)),
    ];
    let dissipation_forms = vec![
        SubForm::empty(),
        SubForm::empty(),
        SubForm::empty(),
        SubForm::on_range(lay.v_t.clone(), scaled(&ops.membrane_mass, p.m_damp)),
    ];
    let g = gram_from_forms(&energy_forms, dim);
    Ok(ModePencil {
        mode: grid.mode,
        m,
        a,
        g,
        layout: lay,
        energy_forms,
        dissipation_forms,
        geometry: Some(PencilGeometry { grid: grid.clone(), ops, params: *p, has_plate: false }),
    })
}

/// Nodal values of the three physical fields, ghost layers included.
#[derive(Debug, Clone)]
pub struct ExtendedFields {
    pub u: Vec<Complex64>,
    pub u_t: Vec<Complex64>,
    pub theta: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub v_t: Vec<Complex64>,
}

impl ExtendedFields {
    fn interior(x: &[Complex64]) -> &[Complex64] {
        &x[GHOSTS..x.len() - GHOSTS]
    }

    pub fn u_nodes(&self) -> &[Complex64] {
        Self::interior(&self.u)
    }

    pub fn theta_nodes(&self) -> &[Complex64] {
        Self::interior(&self.theta)
    }

    pub fn v_nodes(&self) -> &[Complex64] {
        Self::interior(&self.v)
    }
}

/// Residuals of the boundary, transmission and origin rows evaluated on a
/// reconstructed state. The force balance holds only in the limit `h -> 0`
/// since it enters the scheme as a natural condition.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClosureResiduals {
    pub clamp_value: f64,
    pub clamp_slope: f64,
    pub robin: f64,
    pub interface_continuity: f64,
    pub interface_slope: f64,
    pub interface_temperature: f64,
    pub origin: f64,
    pub force_balance: f64,
}

impl ClosureResiduals {
    /// Largest residual among the rows that the ghost maps impose exactly.
    pub fn max_imposed(&self) -> f64 {
        [
            self.clamp_value,
            self.clamp_slope,
            self.robin,
            self.interface_continuity,
            self.interface_slope,
            self.interface_temperature,
            self.origin,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl ModePencil {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Cholesky check of `M` and `G`.
    pub fn check_definite(&self) -> Result<()> {
        checked_cholesky(self.m.as_ref(), "M")?;
        checked_cholesky(self.g.as_ref(), "G")?;
        Ok(())
    }

    /// Grid, operators and parameters the pencil was assembled from.
    pub fn geometry(&self) -> Result<&PencilGeometry> {
        self.geometry
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("pencil carries no grid".into()))
    }

    /// Maps a reduced state to nodal values on the ghost-extended grids.
    pub fn reconstruct(&self, x: &[Complex64]) -> Result<ExtendedFields> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let geo = self.geometry()?;
        let cl = &geo.ops.closures;
        let lay = &self.layout;
        let apply = |e: &Mat<f64>, cols: &[Complex64]| -> Vec<Complex64> {
            (0..e.nrows())
                .map(|i| cols.iter().enumerate().map(|(k, c)| e[(i, k)] * c).sum())
                .collect()
        };
        let zero_plate = |len: usize| vec![Complex64::new(0.0, 0.0); len];
        let nr = geo.grid.n_plate() - 1;
        let joint = |disp: Range<usize>, mem: Range<usize>| -> Vec<Complex64> {
            let mut j = if geo.has_plate { x[disp].to_vec() } else { zero_plate(nr) };
            j.extend_from_slice(&x[mem]);
            j
        };
        let (u, u_t, theta) = if geo.has_plate {
            (
                apply(&cl.plate_u, &x[lay.u.clone()]),
                apply(&cl.plate_u, &x[lay.u_t.clone()]),
                apply(&cl.plate_theta, &x[lay.theta.clone()]),
            )
        } else {
            let ne = geo.grid.n_plate() + 2 * GHOSTS;
            (zero_plate(ne), zero_plate(ne), zero_plate(ne))
        };
        Ok(ExtendedFields {
            u,
            u_t,
            theta,
            v: apply(&cl.membrane, &joint(lay.u.clone(), lay.v.clone())),
            v_t: apply(&cl.membrane, &joint(lay.u_t.clone(), lay.v_t.clone())),
        })
    }

    /// Residuals of all boundary and transmission rows, relative to the
    /// largest nodal magnitude.
    pub fn closure_residuals(&self, x: &[Complex64]) -> Result<ClosureResiduals> {
        let f = self.reconstruct(x)?;
        let geo = self.geometry()?;
        let grid = &geo.grid;
        let p = geo.ops.closures.outer_trace_coef;
        let hp = grid.h_plate;
        let hm = grid.h_mem;
        let g = GHOSTS;
        let n = grid.n_plate();
        let nm = grid.n_mem();
        let scale = f
            .u
            .iter()
            .chain(&f.theta)
            .chain(&f.v)
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut r = ClosureResiduals::default();
        let worst = |slot: &mut f64, val: Complex64| *slot = slot.max(val.norm() / scale);
        let kappa = 2.0 * (1.0 / p - 1.0) / hp;

        for w in [&f.u, &f.u_t] {
            // Zero-slope quadratic extrapolation to r_outer.
            worst(&mut r.clamp_value, (9.0 * w[g + n - 1] - w[g + n - 2]) / 8.0);
            worst(&mut r.clamp_slope, (w[g + n] - w[g + n - 1]) / hp);
            worst(&mut r.clamp_slope, (w[g + n + 1] - w[g + n - 2]) / (3.0 * hp));
            worst(&mut r.interface_slope, (w[g] - w[g - 1]) / hp);
            worst(&mut r.interface_slope, (w[g + 1] - w[g - 2]) / (3.0 * hp));
        }
        let t = &f.theta;
        worst(&mut r.robin, (t[g + n] - t[g + n - 1]) / hp + 0.5 * kappa * (t[g + n] + t[g + n - 1]));
        worst(&mut r.interface_temperature, 0.5 * (t[g] + t[g - 1]));
        for (w, v) in [(&f.u, &f.v), (&f.u_t, &f.v_t)] {
            let ui = (9.0 * w[g] - w[g + 1]) / 8.0;
            worst(&mut r.interface_continuity, 0.5 * (v[g + nm] + v[g + nm - 1]) - ui);
            if grid.mode == 0 {
                worst(&mut r.origin, (v[g] - v[g - 1]) / hm);
            } else {
                worst(&mut r.origin, 0.5 * (v[g] + v[g - 1]));
            }
        }
        if geo.has_plate {
            let fb = force_balance_residual(self, &f);
            r.force_balance = fb / scale;
        }
        Ok(r)
    }
}

fn force_balance_residual(pencil: &ModePencil, f: &ExtendedFields) -> f64 {
    let geo = pencil.geometry.as_ref().expect("checked by caller");
    let grid = &geo.grid;
    let q = &geo.params;
    let g = GHOSTS;
    let hp = grid.h_plate;
    let nm = grid.n_mem();
    let l = laplacian_mode(grid, Domain::Plate);
    let lap: Vec<Complex64> = (g..g + 3).map(|i| (0..l.ncols()).map(|k| l[(i, k)] * f.u[k]).sum()).collect();
    // Quadratic through the first three nodal Laplacians, differentiated at
    // the interface.
    let dlap = (-2.0 * lap[0] + 3.0 * lap[1] - lap[2]) / hp;
    let dtheta = (f.theta[g] - f.theta[g - 1]) / hp;
    let dv = (f.v[g + nm] - f.v[g + nm - 1]) / grid.h_mem;
    (q.beta1 * dlap + q.beta2 * dv + q.mu * dtheta).norm()
}
