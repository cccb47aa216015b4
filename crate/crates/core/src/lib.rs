//! Convolutional network toolkit for classifying friction-stir-weld
//! microstructure images into two welding-efficiency classes.
//!
//! Everything here is `no_std` + `alloc`: dense tensors, affine augmentation,
//! convolution kernels with backpropagation, a synthetic grain-texture
//! generator and the SGD training loop. File formats, dataset directories and
//! the command line live in the companion `weldcnn` crate.

#![no_std]

extern crate alloc;

mod error;

pub mod augment;
pub mod data;
pub mod nn;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
