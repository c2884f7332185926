use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown identifier `{name}` at {pos}")]
    UnknownIdentifier { name: String, pos: usize },

    #[error("variable x{index} at {pos} is out of range for dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize, pos: usize },

    /// Division by zero, log of a non-positive number and similar.
    #[error("{what} in `{subexpr}`")]
    Domain { what: String, subexpr: String },

    #[error("point {point:?} is outside the chart domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("metric is not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { point: Vec<f64>, min_eigenvalue: f64 },

    #[error("metric is ill-conditioned at {point:?} (condition number {condition:e})")]
    IllConditioned { point: Vec<f64>, condition: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {point:?} is not a zero of the field (|xi|_g = {norm:e})")]
    NotAZero { point: Vec<f64>, norm: f64 },

    #[error("geodesic left the chart domain at t = {t}")]
    DomainExit { t: f64 },

    #[error("degenerate patch parametrization at sample {index}")]
    DegeneratePatch { index: usize },

    #[error("empty sample set")]
    EmptySamples,

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("refused: {0}")]
    Refused(String),
}
