use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(#[from] liquidex_core::Error),
    #[error("tolerance breach: {}", .0.join("; "))]
    Tolerance(Vec<String>),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Tolerance(_) => 4,
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 5,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
