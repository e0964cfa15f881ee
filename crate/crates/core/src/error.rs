use thiserror::Error;

/// Errors produced by mesh construction, analysis, fitting and optimisation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid hole {index}: {reason}")]
    InvalidHole { index: usize, reason: String },

    #[error("singular geometry in element {element}: sqrt_a = {sqrt_a:e}")]
    SingularGeometry { element: usize, sqrt_a: f64 },

    #[error("stiffness matrix is singular: {unconstrained} rigid-body mode(s) are not restrained by the supports")]
    UnconstrainedModes { unconstrained: usize },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("training diverged at epoch {epoch}: loss = {loss} (last finite loss {last_finite:e})")]
    Diverged {
        epoch: usize,
        loss: f64,
        last_finite: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("point {0:?} does not lie on any element")]
    OutsideMesh([f64; 2]),

    #[error("optimisation aborted: {0}")]
    OptimisationFailed(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
