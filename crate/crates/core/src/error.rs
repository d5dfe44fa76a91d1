use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty domain")]
    EmptyDomain,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("L^q margin violated: C_* lambda = {bound}, alpha = {alpha}")]
    Margin { bound: f64, alpha: f64 },
    #[error("coercivity violated: alpha = {alpha} >= C_* lambda_B = {bound}")]
    Coercivity { alpha: f64, bound: f64 },
    #[error("no solution at this radius: {0}")]
    NoSolution(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("only trivial solution")]
    TrivialSolution,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
