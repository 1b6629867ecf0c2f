use thiserror::Error;

/// Failure of a subcommand, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid input: configuration, arguments or dataset (exit code 2).
    #[error("{0}")]
    Validation(String),
    /// Failure while running a valid request (exit code 1).
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

impl From<susbayes::Error> for CliError {
    fn from(e: susbayes::Error) -> Self {
        use susbayes::Error as E;
        match e {
            E::Config(_) | E::Prior(_) | E::Dataset(_) => Self::Validation(e.to_string()),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(format!("I/O error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Runtime(format!("CSV error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Runtime(format!("JSON error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
