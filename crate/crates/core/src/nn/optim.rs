//! Stochastic gradient descent with classical momentum.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use super::conv::LayerParams;
use super::model::{Gradients, Model};
use crate::{Error, Result, Tensor};

fn check_hyper(lr: f64, momentum: f64) -> Result<()> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::Argument(format!(
            "learning rate must be finite and ≥ 0, got {lr}"
        )));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::Argument(format!(
            "momentum must lie in [0, 1), got {momentum}"
        )));
    }
    Ok(())
}

/// `v ← momentum·v + g`, then `param ← param − lr·v`.
pub fn sgd_step(
    param: &mut Tensor,
    grad: &Tensor,
    velocity: &mut Tensor,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    check_hyper(lr, momentum)?;
    param.check_same_shape(grad)?;
    param.check_same_shape(velocity)?;
    for ((p, g), v) in param
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(velocity.data_mut())
    {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

/// Optimizer state for every parameter tensor of a [`Model`].
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<Option<LayerParams>>,
}

impl Sgd {
    pub fn new(model: &Model, lr: f64, momentum: f64) -> Result<Self> {
        check_hyper(lr, momentum)?;
        Ok(Self {
            lr,
            momentum,
            velocity: Gradients::zeros_for(model).layers,
        })
    }

    pub fn step(&mut self, model: &mut Model, grads: &Gradients) -> Result<()> {
        let layers = model.layers_mut();
        if layers.len() != grads.layers.len() || layers.len() != self.velocity.len() {
            return Err(Error::Shape(
                "optimizer state does not match the model".to_string(),
            ));
        }
        for ((layer, grad), vel) in layers.iter_mut().zip(&grads.layers).zip(&mut self.velocity) {
            match (layer.params_mut(), grad, vel) {
                (Some(p), Some(g), Some(v)) => {
                    sgd_step(&mut p.w, &g.w, &mut v.w, self.lr, self.momentum)?;
                    sgd_step(&mut p.b, &g.b, &mut v.b, self.lr, self.momentum)?;
                }
                (None, None, None) => {}
                _ => {
                    return Err(Error::Shape(
                        "gradient layout does not match the model".to_string(),
                    ))
                }
            }
        }
        Ok(())
    }
}
