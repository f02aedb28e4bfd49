//! Fourier-radial finite differences: one pencil per angular mode.

mod grid;
mod operators;
mod pencil;

pub use grid::{build_radial_grid, cell_centered_nodes, RadialGrid, MIN_NODES};
pub use operators::{
    build_closures, build_mode_operators, extended_nodes, laplacian_mode, membrane_mass_weights, Closures, Domain,
    ModeOperators, GHOSTS,
};
pub use pencil::{
    assemble_mode_pencil, assemble_mode_pencil_with, gram_matrix, membrane_subpencil, ClosureResiduals, DofLayout,
    ExtendedFields, Field, ModePencil, PencilGeometry, PencilOptions, SubForm, DISSIPATION_TERMS, ENERGY_TERMS,
};
