use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::AnnulusGeometry;

pub const MIN_NODES: usize = 8;

/// Cell-centered radial grids for one Fourier mode `e^{i n theta}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    /// Fourier index. Only `mode^2` enters the operators.
    pub mode: i32,
    pub r_interface: f64,
    pub r_outer: f64,
    pub plate_nodes: Vec<f64>,
    pub membrane_nodes: Vec<f64>,
    pub h_plate: f64,
    pub h_mem: f64,
    /// Midpoint polar weights `2 pi r_i h` on the plate.
    pub plate_weights: Vec<f64>,
    /// Midpoint polar weights `2 pi r_j h` on the membrane.
    pub membrane_weights: Vec<f64>,
}

/// Centers of `n` equal cells on `(a, b)`.
pub fn cell_centered_nodes(a: f64, b: f64, n: usize) -> (Vec<f64>, f64) {
    let h = (b - a) / n as f64;
    ((0..n).map(|i| a + (i as f64 + 0.5) * h).collect(), h)
}

pub fn build_radial_grid(g: &AnnulusGeometry, n_plate: usize, n_mem: usize, mode: i32) -> Result<RadialGrid> {
    if n_plate < MIN_NODES {
        return Err(Error::GridTooSmall { what: "plate grid", min: MIN_NODES, got: n_plate });
    }
    if n_mem < MIN_NODES {
        return Err(Error::GridTooSmall { what: "membrane grid", min: MIN_NODES, got: n_mem });
    }
    let (plate_nodes, h_plate) = cell_centered_nodes(g.r_interface, g.r_outer, n_plate);
    let (membrane_nodes, h_mem) = cell_centered_nodes(0.0, g.r_interface, n_mem);
    let plate_weights = plate_nodes.iter().map(|r| 2.0 * PI * r * h_plate).collect();
    let membrane_weights = membrane_nodes.iter().map(|r| 2.0 * PI * r * h_mem).collect();
    Ok(RadialGrid {
        mode,
        r_interface: g.r_interface,
        r_outer: g.r_outer,
        plate_nodes,
        membrane_nodes,
        h_plate,
        h_mem,
        plate_weights,
        membrane_weights,
    })
}

impl RadialGrid {
    pub fn n_plate(&self) -> usize {
        self.plate_nodes.len()
    }

    pub fn n_mem(&self) -> usize {
        self.membrane_nodes.len()
    }

    pub fn mode_sq(&self) -> f64 {
        let n = self.mode as f64;
        n * n
    }

    /// The same grid for another Fourier index.
    pub fn with_mode(&self, mode: i32) -> Self {
        Self { mode, ..self.clone() }
    }
}
