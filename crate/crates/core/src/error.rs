use thiserror::Error;

pub type Result<T> = std::result::Result<T, SpecVolError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecVolError {
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid option spec: {0}")]
    InvalidSpec(String),
    #[error("invalid index: {0}")]
    InvalidIndex(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("integration failed after {evaluations} evaluations (estimate {estimate:e}, error {error:e})")]
    IntegrationFailure {
        estimate: f64,
        error: f64,
        evaluations: usize,
    },
    #[error("contour offset {offset} does not exceed c+1 = {threshold}")]
    ConvergenceViolation { offset: f64, threshold: f64 },
    #[error("unsupported case: {0}")]
    UnsupportedCase(String),
    #[error("degenerate eigenvalues: {0}")]
    Degeneracy(String),
    #[error("series truncation failed: tail estimate {estimate:e} after {terms} terms")]
    TruncationFailure { estimate: f64, terms: usize },
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("centering condition violated: <f^2 - sigma^2> = {0:e}")]
    CenteringViolation(f64),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("calibration failed: {0}")]
    CalibrationFailure(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for SpecVolError {
    fn from(e: std::io::Error) -> Self {
        SpecVolError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for SpecVolError {
    fn from(e: serde_json::Error) -> Self {
        SpecVolError::Parse(e.to_string())
    }
}

impl From<csv::Error> for SpecVolError {
    fn from(e: csv::Error) -> Self {
        SpecVolError::Parse(e.to_string())
    }
}
