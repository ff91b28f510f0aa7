use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] potkit_core::PotError),
    #[error("plan dump: {0}")]
    Dump(String),
}

pub type Result<T> = std::result::Result<T, CliError>;
