use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvoError {
    #[error("invalid search config: {0}")]
    Config(String),

    #[error(transparent)]
    Arch(#[from] ventus_arch::ArchError),

    #[error("search log: {0}")]
    Log(String),
}

pub type Result<T> = std::result::Result<T, EvoError>;
