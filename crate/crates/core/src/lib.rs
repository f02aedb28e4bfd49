#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod cli;
pub mod discretization;
pub mod error;
pub mod linalg;
pub mod model;
pub mod semigroup;
pub mod lab;
pub mod spectral;
