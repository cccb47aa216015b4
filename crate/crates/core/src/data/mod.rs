//! Labelled samples, dataset splitting and mini-batching.

mod resize;
mod synth;

pub use resize::resize_bilinear;
pub use synth::{
    synth_generate, synth_generate_with_record, SynthRecord, COARSE_CELLS, FINE_CELLS,
    NOISE_AMPLITUDE,
};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use crate::rng;
use crate::{Error, Result, Tensor};

/// Height, width and channels every sample is normalised to.
pub const IMAGE_SHAPE: [usize; 3] = [40, 40, 3];

/// Welding-efficiency class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    /// Efficiency below 80%; target 0.
    Lt80,
    /// Efficiency of at least 80%; target 1.
    Ge80,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Lt80, Label::Ge80];

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            0 => Some(Label::Lt80),
            1 => Some(Label::Ge80),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn target(self) -> f64 {
        self.index() as f64
    }

    /// Directory name used by the on-disk dataset layout.
    pub fn dir_name(self) -> &'static str {
        match self {
            Label::Lt80 => "lt80",
            Label::Ge80 => "ge80",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Tensor,
    pub label: Label,
    pub source_id: String,
}

impl Sample {
    /// Requires a `40 × 40 × 3` image with values in `[0, 1]`.
    pub fn new(image: Tensor, label: Label, source_id: impl Into<String>) -> Result<Self> {
        if image.shape() != IMAGE_SHAPE {
            return Err(Error::Shape(format!(
                "samples must be {IMAGE_SHAPE:?}, got {:?}",
                image.shape()
            )));
        }
        if let Some(v) = image.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Argument(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            image,
            label,
            source_id: source_id.into(),
        })
    }
}

/// Ordered collection of samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(lt80, ge80)` counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let ge = self
            .samples
            .iter()
            .filter(|s| s.label == Label::Ge80)
            .count();
        (self.samples.len() - ge, ge)
    }

    fn subset(&self, indices: &[usize]) -> Self {
        Self::new(indices.iter().map(|&i| self.samples[i].clone()).collect())
    }

    /// Balanced synthetic corpus: `per_class` samples of each class, seeds
    /// derived from `seed` and the sample index.
    pub fn synthetic(per_class: usize, seed: u64) -> Self {
        let mut samples = Vec::with_capacity(2 * per_class);
        for label in Label::ALL {
            for i in 0..per_class {
                samples.push(synth_generate(label, rng::derive_seed(seed, i as u64)));
            }
        }
        Self::new(samples)
    }
}

/// Stratified shuffle split. Each class contributes
/// `round(n_class · train_fraction)` samples to the first half, clamped so
/// both halves keep at least one sample of every class. Both halves keep the
/// input order.
pub fn split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for label in Label::ALL {
        let mut idx: Vec<usize> = (0..d.len())
            .filter(|&i| d.samples[i].label == label)
            .collect();
        if idx.len() < 2 {
            return Err(Error::Split(format!(
                "class {label} has {} samples; at least 2 are needed",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_train = (libm::round(n as f64 * train_fraction) as usize).clamp(1, n - 1);
        train_idx.extend_from_slice(&idx[..n_train]);
        test_idx.extend_from_slice(&idx[n_train..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((d.subset(&train_idx), d.subset(&test_idx)))
}

/// Sample indices of each mini-batch for one epoch. The permutation depends
/// only on `(seed, epoch)`; the last batch may be short.
pub fn batch_indices(
    len: usize,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Argument("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng::seeded(rng::derive_seed(seed, epoch as u64)));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// A stacked mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// `N × H × W × C`.
    pub images: Tensor,
    pub labels: Vec<Label>,
    pub indices: Vec<usize>,
}

/// Materialises the batches of [`batch_indices`] as `N × H × W × C` tensors.
pub fn batches(d: &Dataset, batch_size: usize, seed: u64, epoch: usize) -> Result<Vec<Batch>> {
    batch_indices(d.len(), batch_size, seed, epoch)?
        .into_iter()
        .map(|indices| {
            let first = &d.samples[indices[0]].image;
            let mut shape = alloc::vec![indices.len()];
            shape.extend_from_slice(first.shape());
            let mut data = Vec::with_capacity(indices.len() * first.len());
            let mut labels = Vec::with_capacity(indices.len());
            for &i in &indices {
                let s = &d.samples[i];
                s.image.check_same_shape(first)?;
                data.extend_from_slice(s.image.data());
                labels.push(s.label);
            }
            Ok(Batch {
                images: Tensor::from_vec(&shape, data)?,
                labels,
                indices,
            })
        })
        .collect()
}
