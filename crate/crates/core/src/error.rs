use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state positivity violated: {field}[{index}] = {value}")]
    StatePositivityViolation {
        field: &'static str,
        index: usize,
        value: f64,
    },

    #[error("finite-difference stencil leaves the admissible state set (step {step})")]
    DegenerateStencil { step: f64 },

    #[error("initial density is not positive at r = {radius}")]
    InvalidDensity { radius: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),

    #[error("energy Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("positivity lost in {stage} substep at index {index}")]
    PositivityLoss { stage: &'static str, index: usize },

    #[error("step failed at t = {t}: dt = {dt:e} fell below dt_min ({reason})")]
    StepFailure { t: f64, dt: f64, reason: String },

    #[error("history gap: {0}")]
    HistoryGap(String),

    #[error("reference integrator unstable at dt = {dt:e}")]
    OracleUnstable { dt: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("configuration errors:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
