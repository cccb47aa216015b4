//! Mini-batch training, evaluation and prediction.

use alloc::format;
use alloc::vec::Vec;

use crate::augment::{random_augment, AugmentConfig};
use crate::data::{batch_indices, split, Dataset, Label};
use crate::nn::{Gradients, Model, Sgd};
use crate::rng;
use crate::{Error, Result, Tensor};

/// Stream index separating augmentation draws from other seeded streams.
const AUGMENT_STREAM: u64 = 0xA116_0000;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub seed: u64,
    /// Fraction of the data held out for per-epoch validation.
    pub val_fraction: f64,
    /// Applied to training samples only, with a fresh draw every epoch.
    pub augment: Option<AugmentConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            lr: 0.01,
            momentum: 0.9,
            seed: 0,
            val_fraction: 0.1,
            augment: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate must be finite and ≥ 0, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Argument(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Argument(format!(
                "validation fraction must lie strictly between 0 and 1, got {}",
                self.val_fraction
            )));
        }
        if let Some(aug) = &self.augment {
            aug.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// One record per completed epoch, in order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsHistory {
    pub epochs: Vec<EpochMetrics>,
}

impl MetricsHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }
}

/// Confusion counts with "ge80" as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Ge80, Label::Ge80) => self.tp += 1,
            (Label::Lt80, Label::Ge80) => self.fp += 1,
            (Label::Ge80, Label::Lt80) => self.fn_ += 1,
            (Label::Lt80, Label::Lt80) => self.tn += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub probability: f64,
}

/// Threshold at 0.5; ties go to "ge80".
pub fn classify(probability: f64) -> Label {
    if probability >= 0.5 {
        Label::Ge80
    } else {
        Label::Lt80
    }
}

pub fn predict(model: &Model, img: &Tensor) -> Result<Prediction> {
    let probability = model.forward(img)?;
    Ok(Prediction {
        label: classify(probability),
        probability,
    })
}

/// Mean loss, accuracy and confusion counts over `data`.
pub fn evaluate(model: &Model, data: &Dataset) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut loss = 0.0;
    let mut confusion = Confusion::default();
    for s in &data.samples {
        let p = model.forward(&s.image)?;
        loss += crate::nn::bce_loss(p, s.label.target());
        confusion.record(s.label, classify(p));
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        loss: loss / n,
        accuracy: (confusion.tp + confusion.tn) as f64 / n,
        confusion,
    })
}

/// [`train_with`] without a progress callback.
pub fn train(model: Model, data: &Dataset, cfg: &TrainConfig) -> Result<(Model, MetricsHistory)> {
    train_with(model, data, cfg, |_, _| {})
}

/// Mini-batch SGD on binary cross-entropy.
///
/// A stratified validation split is carved once from `data` before the
/// first epoch. Each batch gradient is the mean of per-sample gradients
/// summed in batch order. Training loss and accuracy are averaged over the
/// forward passes made during the epoch. `on_epoch` receives the 1-based
/// epoch number after each epoch.
pub fn train_with(
    mut model: Model,
    data: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &EpochMetrics),
) -> Result<(Model, MetricsHistory)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (n0, n1) = data.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::Training(format!(
            "both classes are required, got {n0} lt80 and {n1} ge80 samples"
        )));
    }
    let (train_set, val_set) = split(data, 1.0 - cfg.val_fraction, cfg.seed)?;
    let mut sgd = Sgd::new(&model, cfg.lr, cfg.momentum)?;
    let mut history = MetricsHistory::default();

    for epoch in 1..=cfg.epochs {
        let aug_seed = rng::derive_seed(cfg.seed ^ AUGMENT_STREAM, epoch as u64);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in batch_indices(train_set.len(), cfg.batch_size, cfg.seed, epoch)? {
            let mut grads = Gradients::zeros_for(&model);
            for &i in &batch {
                let sample = &train_set.samples[i];
                let augmented;
                let image = match &cfg.augment {
                    Some(aug) => {
                        let mut r = rng::seeded(rng::derive_seed(aug_seed, i as u64));
                        augmented = random_augment(&sample.image, aug, &mut r)?;
                        &augmented
                    }
                    None => &sample.image,
                };
                let pass = model.backward(image, sample.label.target())?;
                loss_sum += pass.loss;
                correct += usize::from(classify(pass.probability) == sample.label);
                grads.accumulate(&pass.grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            sgd.step(&mut model, &grads)?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let val = evaluate(&model, &val_set)?;
        if !val.loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let metrics = EpochMetrics {
            train_loss,
            train_acc: correct as f64 / train_set.len() as f64,
            val_loss: val.loss,
            val_acc: val.accuracy,
        };
        on_epoch(epoch, &metrics);
        history.epochs.push(metrics);
    }
    Ok((model, history))
}
