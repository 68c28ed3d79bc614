use thiserror::Error;

/// Errors raised by grid construction, posterior assembly, distances and estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid posterior spec: {0}")]
    InvalidSpec(String),

    #[error("degenerate posterior: normalizing constant is {0}")]
    DegeneratePosterior(f64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("posteriors live on different grids")]
    GridMismatch,

    #[error("operation requires the euclidean metric")]
    MetricUnsupported,

    #[error("grid of size {size} exceeds the limit of {limit}")]
    BudgetExceeded { size: usize, limit: usize },

    #[error("marginals carry different mass: {supply} vs {demand}")]
    InfeasibleMarginals { supply: f64, demand: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("envelope violated at node {node}: {value} not in [{lower}, {upper}]")]
    EnvelopeViolation {
        node: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
