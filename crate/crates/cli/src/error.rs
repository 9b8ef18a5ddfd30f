use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    /// Carries the full message, which already names the cap.
    #[error("{0}")]
    Cap(String),
    #[error("{0}")]
    Failed(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) | CliError::Failed(_) | CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Cap(_) => 3,
        }
    }
}

impl From<latwalk::error::Error> for CliError {
    fn from(e: latwalk::error::Error) -> Self {
        use latwalk::error::Error as E;
        match e {
            E::CapExceeded { .. } => CliError::Cap(e.to_string()),
            E::InvalidParameter(_) | E::Dimension(_) => CliError::Config(e.to_string()),
            E::Contract(_) => CliError::Invariant(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}
