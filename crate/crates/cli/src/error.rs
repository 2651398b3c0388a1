use thiserror::Error;

/// Failure of a run, classified by exit status.
#[derive(Debug, Error)]
pub enum RunError {
    /// Bad configuration or inconsistent inputs. Exit status 2.
    #[error("invalid configuration: {0}")]
    Validation(String),
    /// A solver or simulation produced non-finite numbers or failed to
    /// converge. Exit status 3.
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Numeric(_) => 3,
            RunError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Validation(_) => "validation",
            RunError::Numeric(_) => "numeric",
            RunError::Io(_) => "io",
        }
    }
}

impl From<mfglab_core::Error> for RunError {
    fn from(e: mfglab_core::Error) -> Self {
        use mfglab_core::Error as E;
        match e {
            E::NonFiniteState { .. }
            | E::NonFiniteValue { .. }
            | E::Divergence(_)
            | E::OracleNotConverged { .. }
            | E::ActionOutsideSet { .. } => RunError::Numeric(e.to_string()),
            E::Io(io) => RunError::Io(io),
            other => RunError::Validation(other.to_string()),
        }
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(std::io::Error::other(e))
    }
}

pub type RunResult<T> = Result<T, RunError>;
