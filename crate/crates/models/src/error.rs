use thiserror::Error;
use ventus_arch::ArchError;
use ventus_core::CoreError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error(transparent)]
    Arch(#[from] ArchError),

    #[error("invalid model spec: {0}")]
    Spec(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("training diverged at epoch {epoch} (learning rate {learning_rate}): {reason}")]
    Diverged {
        epoch: usize,
        learning_rate: f64,
        reason: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl ModelError {
    pub fn spec(msg: impl Into<String>) -> Self {
        ModelError::Spec(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        ModelError::Input(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
