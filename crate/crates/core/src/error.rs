use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("eigendecomposition did not converge")]
    EigenFailure,
    #[error("resolution insufficient: {0}")]
    ResolutionInsufficient(String),
    #[error("negative argument {0}")]
    NegativeArgument(f64),
    #[error("root bracketing failed: {0}")]
    Bracketing(String),
    #[error("field is identically zero")]
    ZeroField,
    #[error("support overflow: {0}")]
    SupportOverflow(String),
    #[error("frequency {0} outside the dyadic ladder")]
    OutOfRange(f64),
    #[error("nonlinearity overflow: {0}")]
    Overflow(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("output error: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, Error>;
