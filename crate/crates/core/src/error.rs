use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training error: {0}")]
    Training(String),
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Divergence { epoch: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
