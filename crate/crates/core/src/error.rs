use std::path::PathBuf;

use thiserror::Error;

/// A single violated parameter or geometry invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub value: f64,
    pub requirement: &'static str,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} = {} ({})", self.field, self.value, self.requirement)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join_violations(.0))]
    InvalidParameters(Vec<Violation>),

    #[error("{what} needs at least {min} nodes, got {got}")]
    GridTooSmall { what: &'static str, min: usize, got: usize },

    #[error("singular closure system at boundary row `{row}`")]
    SingularClosure { row: &'static str },

    #[error("matrix `{what}` is not positive definite")]
    NotPositiveDefinite { what: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("eigensolver failed on pencil of dimension {dim} (mode {mode})")]
    EigenFailure { dim: usize, mode: i32 },

    #[error("dense method limited to dimension {cap}, got {dim}")]
    DimensionCap { cap: usize, dim: usize },

    #[error("shift i*{lambda} is (numerically) an eigenvalue")]
    SingularShift { lambda: f64 },

    #[error("fit needs at least {min} samples in the window, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("nonpositive energy {value} at t = {time} inside the fit window")]
    NonPositiveEnergy { time: f64, value: f64 },

    #[error("fit window [{t_lo}, {t_hi}] does not span a decade of time")]
    WindowTooShort { t_lo: f64, t_hi: f64 },

    #[error("initial profile `{0}` has zero energy after projection")]
    DegenerateProfile(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}, column {column}: {message}")]
    Config { line: usize, column: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
