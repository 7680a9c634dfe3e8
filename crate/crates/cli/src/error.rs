use qsl_core::QslError;
use thiserror::Error;

/// Failures surfaced by the command-line front end.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, unknown preset or unreadable input.
    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] QslError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn scenario(msg: impl Into<String>) -> Self {
        Self::Scenario(msg.into())
    }

    /// 2 for scenario and i/o errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Scenario(_) | Self::Io(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(std::io::Error::other(e))
    }
}

/// Lifts a core error raised while validating a scenario.
pub(crate) fn invalid(e: QslError) -> CliError {
    CliError::Scenario(e.to_string())
}
