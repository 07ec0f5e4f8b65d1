use thiserror::Error;

/// Failure of a command, carrying its exit code: 1 for a failed check (the
/// report is still written), 2 for bad arguments, input or numerics, 3 when
/// a recursion budget runs out.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("{0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("recursion budget of {0} calls exceeded")]
    Budget(u64),
    #[error(transparent)]
    Library(bartgp::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::CheckFailed(_) => 1,
            Self::Budget(_) => 3,
            _ => 2,
        }
    }
}

impl From<bartgp::Error> for CliError {
    fn from(e: bartgp::Error) -> Self {
        match e {
            bartgp::Error::BudgetExceeded { limit } => Self::Budget(limit),
            e => Self::Library(e),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
