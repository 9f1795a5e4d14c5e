use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] patchdim::Error),

    #[error("bad config: {0}")]
    Config(String),

    #[error("bad input: {0}")]
    Input(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Config(_) => "config",
            CliError::Input(_) => "input",
            CliError::Usage(_) => "usage",
            CliError::Output(_) => "output",
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}
