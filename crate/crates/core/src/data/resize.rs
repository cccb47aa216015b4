use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result, Tensor};

/// Source coordinate of output index `i` when corners are aligned.
fn source_coord(i: usize, out: usize, src: usize) -> f64 {
    if out == 1 {
        (src as f64 - 1.0) / 2.0
    } else {
        (i * (src - 1)) as f64 / (out - 1) as f64
    }
}

/// Exact at `t = 0` and for `a == b`; never leaves `[min(a, b), max(a, b)]`.
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    (a + (b - a) * t).clamp(a.min(b), a.max(b))
}

/// Bilinear resize of an `H × W × C` image with corner-aligned sample
/// positions: output corners coincide with input corners.
pub fn resize_bilinear(img: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let &[h, w, c] = img.shape() else {
        return Err(Error::Shape(format!(
            "resize expects an H×W×C image, got {:?}",
            img.shape()
        )));
    };
    if out_h == 0 || out_w == 0 {
        return Err(Error::Shape(format!("cannot resize to {out_h}×{out_w}")));
    }
    if (out_h, out_w) == (h, w) {
        return Ok(img.clone());
    }
    let src = img.data();
    let taps = |out: usize, n: usize| -> Vec<(usize, usize, f64)> {
        (0..out)
            .map(|i| {
                let x = source_coord(i, out, n);
                let x0 = libm::floor(x) as usize;
                let x1 = (x0 + 1).min(n - 1);
                (x0, x1, x - x0 as f64)
            })
            .collect()
    };
    let rows = taps(out_h, h);
    let cols = taps(out_w, w);
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for &(r0, r1, fy) in &rows {
        for &(c0, c1, fx) in &cols {
            for ch in 0..c {
                let at = |r: usize, col: usize| src[(r * w + col) * c + ch];
                let top = lerp(at(r0, c0), at(r0, c1), fx);
                let bottom = lerp(at(r1, c0), at(r1, c1), fx);
                out.push(lerp(top, bottom, fy));
            }
        }
    }
    Tensor::from_vec(&[out_h, out_w, c], out)
}
