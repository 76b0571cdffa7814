use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid observation: {0}")]
    Observation(String),
    #[error("belief initialization error: {0}")]
    Init(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("statistics error: {0}")]
    Statistics(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("backend transport error: {0}")]
    Transport(String),
    #[error("backend contract error: {0}")]
    Contract(String),
}
