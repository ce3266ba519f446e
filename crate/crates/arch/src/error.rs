use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArchError {
    #[error("invalid architecture: {0}")]
    Invalid(String),
    #[error("shape error at {node}: {reason}")]
    Shape { node: String, reason: String },
    #[error("cannot parse architecture: {0}")]
    Parse(String),
    #[error("gave up after {0} attempts to build a valid architecture")]
    Exhausted(usize),
}
