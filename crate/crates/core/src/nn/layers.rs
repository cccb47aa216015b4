use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::conv::{axpy, dot, LayerParams};
use crate::{Error, Result, Tensor};

/// Probabilities are clamped into `[BCE_CLAMP, 1 - BCE_CLAMP]` before taking logs.
pub const BCE_CLAMP: f64 = 1e-12;

pub fn relu_forward(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Passes `grad_out` where `x > 0`; the subgradient at zero is zero.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    x.zip(grad_out, |v, g| if v > 0.0 { g } else { 0.0 })
}

/// Argmax positions recorded by [`maxpool_forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct PoolRecord {
    pub input_shape: Vec<usize>,
    pub argmax: Vec<usize>,
}

pub fn maxpool_output_shape(input: &[usize], window: usize) -> Result<[usize; 3]> {
    let [h, w, c] = *input else {
        return Err(Error::Shape(format!(
            "max pooling expects an H×W×C input, got {input:?}"
        )));
    };
    if window == 0 || window > h || window > w {
        return Err(Error::Shape(format!(
            "pooling window {window} does not fit a {h}×{w} input"
        )));
    }
    Ok([h / window, w / window, c])
}

/// Non-overlapping `window × window` max pooling; trailing rows and columns
/// that do not fill a window are dropped. Ties go to the first element in
/// row-major scan order.
pub fn maxpool_forward(x: &Tensor, window: usize) -> Result<(Tensor, PoolRecord)> {
    let [oh, ow, c] = maxpool_output_shape(x.shape(), window)?;
    let w = x.shape()[1];
    let xd = x.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut argmax = Vec::with_capacity(oh * ow * c);
    for qr in 0..oh {
        for qc in 0..ow {
            for ch in 0..c {
                let mut best = usize::MAX;
                let mut best_v = f64::NEG_INFINITY;
                for i in 0..window {
                    for j in 0..window {
                        let at = ((qr * window + i) * w + qc * window + j) * c + ch;
                        if best == usize::MAX || xd[at] > best_v {
                            best = at;
                            best_v = xd[at];
                        }
                    }
                }
                out.push(best_v);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::from_vec(&[oh, ow, c], out)?,
        PoolRecord {
            input_shape: x.shape().to_vec(),
            argmax,
        },
    ))
}

/// Routes each output gradient to the input element that won its window.
pub fn maxpool_backward(record: &PoolRecord, grad_out: &Tensor) -> Result<Tensor> {
    if grad_out.len() != record.argmax.len() {
        return Err(Error::Shape(format!(
            "pooling gradient has {} elements, forward produced {}",
            grad_out.len(),
            record.argmax.len()
        )));
    }
    let mut gx = Tensor::zeros(&record.input_shape)?;
    let data = gx.data_mut();
    for (&at, &g) in record.argmax.iter().zip(grad_out.data()) {
        data[at] += g;
    }
    Ok(gx)
}

fn dense_dims(params: &LayerParams) -> Result<(usize, usize)> {
    match (params.w.shape(), params.b.shape()) {
        (&[out, inp], &[bo]) if bo == out => Ok((out, inp)),
        (w, b) => Err(Error::Shape(format!(
            "dense parameters must be out×in and out, got {w:?} and {b:?}"
        ))),
    }
}

/// `W·x + b` for a vector `x`.
pub fn dense_forward(x: &Tensor, params: &LayerParams) -> Result<Tensor> {
    let (out, inp) = dense_dims(params)?;
    if x.shape() != [inp] {
        return Err(Error::Shape(format!(
            "dense layer expects a vector of {inp}, got {:?}",
            x.shape()
        )));
    }
    let y: Vec<f64> = params
        .w
        .data()
        .chunks_exact(inp)
        .zip(params.b.data())
        .map(|(row, b)| dot(row, x.data()) + b)
        .collect();
    Tensor::from_vec(&[out], y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub x: Tensor,
    pub params: LayerParams,
}

/// `grad_x = Wᵀ·g`, `grad_W = g ⊗ x`, `grad_b = g`.
pub fn dense_backward(x: &Tensor, params: &LayerParams, grad_out: &Tensor) -> Result<DenseGrads> {
    let (out, inp) = dense_dims(params)?;
    if x.shape() != [inp] || grad_out.shape() != [out] {
        return Err(Error::Shape(format!(
            "dense backward expects x of [{inp}] and gradient of [{out}], got {:?} and {:?}",
            x.shape(),
            grad_out.shape()
        )));
    }
    let mut gx = vec![0.0; inp];
    let mut gw = vec![0.0; out * inp];
    for (k, (&g, row)) in grad_out
        .data()
        .iter()
        .zip(params.w.data().chunks_exact(inp))
        .enumerate()
    {
        axpy(g, row, &mut gx);
        axpy(g, x.data(), &mut gw[k * inp..(k + 1) * inp]);
    }
    Ok(DenseGrads {
        x: Tensor::from_vec(&[inp], gx)?,
        params: LayerParams {
            w: Tensor::from_vec(&[out, inp], gw)?,
            b: grad_out.clone(),
        },
    })
}

/// Logistic function, kept strictly inside `(0, 1)` even where `f64`
/// would round to an endpoint.
pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Binary cross-entropy of probability `p` against a 0/1 target.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    -(y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p))
}
