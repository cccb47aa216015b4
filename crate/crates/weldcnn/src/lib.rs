//! File formats, dataset directories and the `weldcnn` command line on top
//! of [`weldcnn_core`].

mod error;

pub mod cli;
pub mod dataset;
pub mod image_io;
pub mod metrics;
pub mod model_io;

pub use error::{Error, ModelFormatError, Result};
