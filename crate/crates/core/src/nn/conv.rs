//! 2-D convolution over `H × W × C` images.
//!
//! Filters are stored as `n_filters × f × f × c_in`, so a filter row is laid
//! out exactly like an input patch. The fast path lowers the input to a patch
//! matrix (one row per output position) and multiplies it with the filter
//! matrix; the backward pass reuses the same lowering.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, Tensor};

/// Hyperparameters of one convolution layer (square filters).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub f: usize,
    pub s: usize,
    pub p: usize,
    pub c_in: usize,
    pub n_filters: usize,
}

/// Weights and biases of a parameterised layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub w: Tensor,
    pub b: Tensor,
}

impl LayerParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            w: self.w.zeros_like(),
            b: self.b.zeros_like(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Gradients produced by [`conv2d_backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub x: Tensor,
    pub params: LayerParams,
}

/// Output extent `floor((n + 2p - f) / s) + 1`.
pub fn conv_out_size(n: usize, p: usize, f: usize, s: usize) -> Result<usize> {
    if n == 0 || f == 0 || s == 0 {
        return Err(Error::Shape(format!(
            "extent, filter and stride must be positive (n={n}, f={f}, s={s})"
        )));
    }
    let padded = n + 2 * p;
    if padded < f {
        return Err(Error::Shape(format!(
            "filter {f} larger than padded input {padded}"
        )));
    }
    Ok((padded - f) / s + 1)
}

impl ConvSpec {
    pub fn weight_shape(&self) -> [usize; 4] {
        [self.n_filters, self.f, self.f, self.c_in]
    }

    /// Number of inputs feeding one output value.
    pub fn fan_in(&self) -> usize {
        self.f * self.f * self.c_in
    }

    pub fn validate(&self) -> Result<()> {
        if self.f == 0 || self.s == 0 || self.c_in == 0 || self.n_filters == 0 {
            return Err(Error::Shape(format!(
                "degenerate convolution spec {self:?}"
            )));
        }
        Ok(())
    }

    /// Output shape for an `H × W × c_in` input.
    pub fn output_shape(&self, input: &[usize]) -> Result<[usize; 3]> {
        self.validate()?;
        let [h, w, c] = *input else {
            return Err(Error::Shape(format!(
                "convolution expects an H×W×C input, got {input:?}"
            )));
        };
        if c != self.c_in {
            return Err(Error::Shape(format!(
                "convolution expects {} input channels, got {c}",
                self.c_in
            )));
        }
        Ok([
            conv_out_size(h, self.p, self.f, self.s)?,
            conv_out_size(w, self.p, self.f, self.s)?,
            self.n_filters,
        ])
    }

    fn check_params(&self, params: &LayerParams) -> Result<()> {
        if params.w.shape() != self.weight_shape() || params.b.shape() != [self.n_filters] {
            return Err(Error::Shape(format!(
                "convolution parameters {:?}/{:?} do not match spec {self:?}",
                params.w.shape(),
                params.b.shape()
            )));
        }
        Ok(())
    }
}

/// Direct summation: every output is the weighted sum of its `f × f × C`
/// patch of the zero-padded input plus the filter bias.
pub fn conv2d_forward(x: &Tensor, spec: &ConvSpec, params: &LayerParams) -> Result<Tensor> {
    let [oh, ow, nf] = spec.output_shape(x.shape())?;
    spec.check_params(params)?;
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (xd, wd, bd) = (x.data(), params.w.data(), params.b.data());
    let f = spec.f;
    let mut out = Vec::with_capacity(oh * ow * nf);
    for qr in 0..oh {
        for qc in 0..ow {
            for k in 0..nf {
                let mut acc = 0.0;
                for i in 0..f {
                    let r = (qr * spec.s + i) as isize - spec.p as isize;
                    if r < 0 || r as usize >= h {
                        continue;
                    }
                    for j in 0..f {
                        let col = (qc * spec.s + j) as isize - spec.p as isize;
                        if col < 0 || col as usize >= w {
                            continue;
                        }
                        let xo = (r as usize * w + col as usize) * c;
                        let wo = ((k * f + i) * f + j) * c;
                        for ch in 0..c {
                            acc += wd[wo + ch] * xd[xo + ch];
                        }
                    }
                }
                out.push(acc + bd[k]);
            }
        }
    }
    Tensor::from_vec(&[oh, ow, nf], out)
}

/// Patch matrix with `oh·ow` rows of `f·f·c` entries each.
fn im2col(x: &Tensor, spec: &ConvSpec, oh: usize, ow: usize) -> Vec<f64> {
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let f = spec.f;
    let row_len = f * f * c;
    let xd = x.data();
    let mut cols = vec![0.0; oh * ow * row_len];
    for qr in 0..oh {
        for qc in 0..ow {
            let row = &mut cols[(qr * ow + qc) * row_len..][..row_len];
            for i in 0..f {
                let r = (qr * spec.s + i) as isize - spec.p as isize;
                if r < 0 || r as usize >= h {
                    continue;
                }
                for j in 0..f {
                    let col = (qc * spec.s + j) as isize - spec.p as isize;
                    if col < 0 || col as usize >= w {
                        continue;
                    }
                    let xo = (r as usize * w + col as usize) * c;
                    row[(i * f + j) * c..][..c].copy_from_slice(&xd[xo..xo + c]);
                }
            }
        }
    }
    cols
}

/// Scatter-adds patch-matrix rows back onto an `H × W × C` image.
fn col2im(cols: &[f64], spec: &ConvSpec, input_shape: &[usize], oh: usize, ow: usize) -> Vec<f64> {
    let (h, w, c) = (input_shape[0], input_shape[1], input_shape[2]);
    let f = spec.f;
    let row_len = f * f * c;
    let mut img = vec![0.0; h * w * c];
    for qr in 0..oh {
        for qc in 0..ow {
            let row = &cols[(qr * ow + qc) * row_len..][..row_len];
            for i in 0..f {
                let r = (qr * spec.s + i) as isize - spec.p as isize;
                if r < 0 || r as usize >= h {
                    continue;
                }
                for j in 0..f {
                    let col = (qc * spec.s + j) as isize - spec.p as isize;
                    if col < 0 || col as usize >= w {
                        continue;
                    }
                    let xo = (r as usize * w + col as usize) * c;
                    for (dst, src) in img[xo..xo + c].iter_mut().zip(&row[(i * f + j) * c..]) {
                        *dst += src;
                    }
                }
            }
        }
    }
    img
}

/// Dot product with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Same result as [`conv2d_forward`] via the patch-matrix product.
pub fn conv2d_forward_fast(x: &Tensor, spec: &ConvSpec, params: &LayerParams) -> Result<Tensor> {
    let [oh, ow, nf] = spec.output_shape(x.shape())?;
    spec.check_params(params)?;
    let cols = im2col(x, spec, oh, ow);
    let row_len = spec.fan_in();
    let (wd, bd) = (params.w.data(), params.b.data());
    let mut out = Vec::with_capacity(oh * ow * nf);
    for patch in cols.chunks_exact(row_len) {
        for (filter, &bias) in wd.chunks_exact(row_len).zip(bd) {
            out.push(dot(patch, filter) + bias);
        }
    }
    Tensor::from_vec(&[oh, ow, nf], out)
}

/// Gradients of `Σ grad_out ⊙ conv(x)` with respect to the input, weights and
/// biases.
pub fn conv2d_backward(
    x: &Tensor,
    spec: &ConvSpec,
    params: &LayerParams,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    let (params_grad, cols_grad) = conv2d_backward_inner(x, spec, params, grad_out, true)?;
    let [oh, ow, _] = spec.output_shape(x.shape())?;
    let gx = col2im(&cols_grad.unwrap_or_default(), spec, x.shape(), oh, ow);
    Ok(ConvGrads {
        x: Tensor::from_vec(x.shape(), gx)?,
        params: params_grad,
    })
}

/// Parameter gradients only; skips the input gradient.
pub fn conv2d_backward_params(
    x: &Tensor,
    spec: &ConvSpec,
    params: &LayerParams,
    grad_out: &Tensor,
) -> Result<LayerParams> {
    Ok(conv2d_backward_inner(x, spec, params, grad_out, false)?.0)
}

fn conv2d_backward_inner(
    x: &Tensor,
    spec: &ConvSpec,
    params: &LayerParams,
    grad_out: &Tensor,
    want_input: bool,
) -> Result<(LayerParams, Option<Vec<f64>>)> {
    let out_shape = spec.output_shape(x.shape())?;
    spec.check_params(params)?;
    if grad_out.shape() != out_shape {
        return Err(Error::Shape(format!(
            "output gradient {:?} does not match convolution output {out_shape:?}",
            grad_out.shape()
        )));
    }
    let [oh, ow, nf] = out_shape;
    let row_len = spec.fan_in();
    let cols = im2col(x, spec, oh, ow);
    let wd = params.w.data();
    let gd = grad_out.data();

    let mut gw = vec![0.0; wd.len()];
    let mut gb = vec![0.0; nf];
    let mut gcols = want_input.then(|| vec![0.0; cols.len()]);
    for (pos, patch) in cols.chunks_exact(row_len).enumerate() {
        let g = &gd[pos * nf..(pos + 1) * nf];
        for (k, &gk) in g.iter().enumerate() {
            if gk == 0.0 {
                continue;
            }
            gb[k] += gk;
            axpy(gk, patch, &mut gw[k * row_len..(k + 1) * row_len]);
            if let Some(gc) = gcols.as_mut() {
                axpy(
                    gk,
                    &wd[k * row_len..(k + 1) * row_len],
                    &mut gc[pos * row_len..(pos + 1) * row_len],
                );
            }
        }
    }
    Ok((
        LayerParams {
            w: Tensor::from_vec(&spec.weight_shape(), gw)?,
            b: Tensor::from_vec(&[nf], gb)?,
        },
        gcols,
    ))
}
