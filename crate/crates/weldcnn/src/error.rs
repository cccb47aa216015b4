use std::io;
use std::path::PathBuf;

/// Ways a model file can be malformed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelFormatError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("invalid header: {0}")]
    Header(String),
    #[error("weights inconsistent with header: {0}")]
    Inconsistent(String),
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("decode error: {0}")]
    Decode(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("dataset layout error: {0}")]
    Layout(String),
    #[error("no decodable images under {}", .0.display())]
    EmptyDataset(PathBuf),
    #[error("model format error: {0}")]
    ModelFormat(#[from] ModelFormatError),
    #[error("unsupported model file version {found} (this build reads version {expected})")]
    Version { found: u16, expected: u16 },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Core(#[from] weldcnn_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
