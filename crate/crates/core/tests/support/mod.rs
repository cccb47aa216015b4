//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use weldcnn_core::augment::{
    affine_rotation, random_augment, warp, AffineTransform, AugmentConfig, Recipe,
};
use weldcnn_core::data::{Label, IMAGE_SHAPE};
use weldcnn_core::nn::{
    bce_loss, conv2d_backward, conv2d_forward, conv2d_forward_fast, dense_backward, dense_forward,
    maxpool_backward, maxpool_forward, relu_backward, relu_forward, sigmoid, ConvSpec, Layer,
    LayerParams, LayerSpec, Model,
};
use weldcnn_core::rng::{self, Rng};
use weldcnn_core::Tensor;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;
/// Denominator floor of [`rel_err`]; central differences of O(1) losses
/// carry roughly 1e-11 of rounding noise at the chosen step.
pub const REL_FLOOR: f64 = 1e-8;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(REL_FLOOR)
}

pub fn random_tensor(shape: &[usize], lo: f64, hi: f64, r: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng::uniform(r, lo, hi)).collect()).unwrap()
}

/// Central difference of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| {
            let v = x.data()[i];
            probe.data_mut()[i] = v + FD_STEP;
            let up = f(&probe);
            probe.data_mut()[i] = v - FD_STEP;
            let down = f(&probe);
            probe.data_mut()[i] = v;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

fn weighted_sum(y: &Tensor, g: &Tensor) -> f64 {
    y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
}

/// Direct summation over output position, filter, kernel offset and channel.
pub fn oracle_conv(x: &Tensor, spec: &ConvSpec, params: &LayerParams) -> Tensor {
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (f, s, p) = (spec.f, spec.s, spec.p);
    let oh = (h + 2 * p - f) / s + 1;
    let ow = (w + 2 * p - f) / s + 1;
    let mut out = Tensor::zeros(&[oh, ow, spec.n_filters]).unwrap();
    for i in 0..oh {
        for j in 0..ow {
            for k in 0..spec.n_filters {
                let mut acc = params.b.data()[k];
                for a in 0..f {
                    for b in 0..f {
                        let (r, q) = (
                            (i * s + a) as isize - p as isize,
                            (j * s + b) as isize - p as isize,
                        );
                        if r < 0 || q < 0 || r >= h as isize || q >= w as isize {
                            continue;
                        }
                        for ch in 0..c {
                            acc += x.get(&[r as usize, q as usize, ch]).unwrap()
                                * params.w.get(&[k, a, b, ch]).unwrap();
                        }
                    }
                }
                out.set(&[i, j, k], acc).unwrap();
            }
        }
    }
    out
}

pub fn random_conv(spec: &ConvSpec, r: &mut Rng) -> LayerParams {
    LayerParams {
        w: random_tensor(&[spec.n_filters, spec.f, spec.f, spec.c_in], -1.0, 1.0, r),
        b: random_tensor(&[spec.n_filters], -1.0, 1.0, r),
    }
}

/// Every (f, s, p, c) combination of the oracle grid at two input sizes.
pub fn conv_grid(seed: u64) -> Vec<(Tensor, ConvSpec, LayerParams)> {
    let mut r = rng::seeded(seed);
    let mut cases = Vec::new();
    for f in [1, 2, 3, 6] {
        for s in [1, 2] {
            for p in [0, 1] {
                for c_in in [1, 3, 10] {
                    for extra in [0, 1 + rng::uniform_int(&mut r, 0, 6)] {
                        let n_filters = rng::uniform_int(&mut r, 1, 4);
                        let spec = ConvSpec {
                            f,
                            s,
                            p,
                            c_in,
                            n_filters,
                        };
                        let h = f + extra;
                        let w = f + rng::uniform_int(&mut r, 0, 5);
                        let x = random_tensor(&[h, w, c_in], -1.0, 1.0, &mut r);
                        let params = random_conv(&spec, &mut r);
                        cases.push((x, spec, params));
                    }
                }
            }
        }
    }
    cases
}

/// Largest difference between fast and naive library paths and the oracle.
pub fn conv_grid_max_diff(seed: u64) -> (usize, f64) {
    let cases = conv_grid(seed);
    let mut worst: f64 = 0.0;
    for (x, spec, params) in &cases {
        let fast = conv2d_forward_fast(x, spec, params).unwrap();
        let naive = conv2d_forward(x, spec, params).unwrap();
        let oracle = oracle_conv(x, spec, params);
        worst = worst
            .max(fast.max_abs_diff(&naive).unwrap())
            .max(fast.max_abs_diff(&oracle).unwrap());
    }
    (cases.len(), worst)
}

/// One gradient-check trial: its name and the worst relative error.
#[derive(Debug, Clone)]
pub struct GradTrial {
    pub name: String,
    pub max_rel_err: f64,
    pub checked: usize,
}

pub fn conv_grad_trial(seed: u64) -> GradTrial {
    let mut r = rng::seeded(seed);
    let f = [1, 2, 3][rng::uniform_int(&mut r, 0, 2)];
    let s = rng::uniform_int(&mut r, 1, 2);
    let p = rng::uniform_int(&mut r, 0, 1);
    let c_in = rng::uniform_int(&mut r, 1, 3);
    let spec = ConvSpec {
        f,
        s,
        p,
        c_in,
        n_filters: rng::uniform_int(&mut r, 1, 3),
    };
    let x = random_tensor(&[f + 3, f + 2, c_in], -1.0, 1.0, &mut r);
    let params = random_conv(&spec, &mut r);
    let out_shape = conv2d_forward(&x, &spec, &params).unwrap().shape().to_vec();
    let g = random_tensor(&out_shape, -1.0, 1.0, &mut r);
    let analytic = conv2d_backward(&x, &spec, &params, &g).unwrap();

    let nx = numeric_grad(&x, |x| {
        weighted_sum(&conv2d_forward(x, &spec, &params).unwrap(), &g)
    });
    let nw = numeric_grad(&params.w, |w| {
        let p = LayerParams {
            w: w.clone(),
            b: params.b.clone(),
        };
        weighted_sum(&conv2d_forward(&x, &spec, &p).unwrap(), &g)
    });
    let nb = numeric_grad(&params.b, |b| {
        let p = LayerParams {
            w: params.w.clone(),
            b: b.clone(),
        };
        weighted_sum(&conv2d_forward(&x, &spec, &p).unwrap(), &g)
    });
    let err = max_rel_err(analytic.x.data(), &nx)
        .max(max_rel_err(analytic.params.w.data(), &nw))
        .max(max_rel_err(analytic.params.b.data(), &nb));
    GradTrial {
        name: format!("conv f={f} s={s} p={p} c={c_in}"),
        max_rel_err: err,
        checked: nx.len() + nw.len() + nb.len(),
    }
}

pub fn relu_grad_trial(seed: u64) -> GradTrial {
    let mut r = rng::seeded(seed);
    let x = random_tensor(&[5, 4, 3], -1.0, 1.0, &mut r);
    let g = random_tensor(&[5, 4, 3], -1.0, 1.0, &mut r);
    let analytic = relu_backward(&x, &g).unwrap();
    let numeric = numeric_grad(&x, |x| weighted_sum(&relu_forward(x), &g));
    // Entries within 1e-3 of the kink are excluded.
    let (mut err, mut checked) = (0.0_f64, 0);
    for (i, (&a, &n)) in analytic.data().iter().zip(&numeric).enumerate() {
        if x.data()[i].abs() >= 1e-3 {
            err = err.max(rel_err(a, n));
            checked += 1;
        }
    }
    GradTrial {
        name: "relu".into(),
        max_rel_err: err,
        checked,
    }
}

pub fn maxpool_grad_trial(seed: u64) -> GradTrial {
    let mut r = rng::seeded(seed);
    let window = rng::uniform_int(&mut r, 2, 3);
    let (h, w) = (window * 2 + rng::uniform_int(&mut r, 0, 1), window * 2 + 1);
    // Distinct values on a shuffled lattice keep every window's maximum
    // unique by a margin far larger than the step.
    let n = h * w * 2;
    let mut values: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    for i in (1..n).rev() {
        values.swap(i, rng::uniform_int(&mut r, 0, i));
    }
    let x = Tensor::from_vec(&[h, w, 2], values).unwrap();
    let (y, rec) = maxpool_forward(&x, window).unwrap();
    let g = random_tensor(y.shape(), -1.0, 1.0, &mut r);
    let analytic = maxpool_backward(&rec, &g).unwrap();
    let numeric = numeric_grad(&x, |x| {
        weighted_sum(&maxpool_forward(x, window).unwrap().0, &g)
    });
    GradTrial {
        name: format!("maxpool window={window}"),
        max_rel_err: max_rel_err(analytic.data(), &numeric),
        checked: numeric.len(),
    }
}

pub fn dense_grad_trial(seed: u64) -> GradTrial {
    let mut r = rng::seeded(seed);
    let (inp, out) = (
        rng::uniform_int(&mut r, 1, 12),
        rng::uniform_int(&mut r, 1, 4),
    );
    let params = LayerParams {
        w: random_tensor(&[out, inp], -1.0, 1.0, &mut r),
        b: random_tensor(&[out], -1.0, 1.0, &mut r),
    };
    let x = random_tensor(&[inp], -1.0, 1.0, &mut r);
    let g = random_tensor(&[out], -1.0, 1.0, &mut r);
    let analytic = dense_backward(&x, &params, &g).unwrap();
    let nx = numeric_grad(&x, |x| {
        weighted_sum(&dense_forward(x, &params).unwrap(), &g)
    });
    let nw = numeric_grad(&params.w, |w| {
        let p = LayerParams {
            w: w.clone(),
            b: params.b.clone(),
        };
        weighted_sum(&dense_forward(&x, &p).unwrap(), &g)
    });
    let nb = numeric_grad(&params.b, |b| {
        let p = LayerParams {
            w: params.w.clone(),
            b: b.clone(),
        };
        weighted_sum(&dense_forward(&x, &p).unwrap(), &g)
    });
    GradTrial {
        name: format!("dense {inp}->{out}"),
        max_rel_err: max_rel_err(analytic.x.data(), &nx)
            .max(max_rel_err(analytic.params.w.data(), &nw))
            .max(max_rel_err(analytic.params.b.data(), &nb)),
        checked: nx.len() + nw.len() + nb.len(),
    }
}

/// `d bce(sigmoid(z), y) / dz` against `p - y`.
pub fn sigmoid_bce_grad_trial(seed: u64) -> GradTrial {
    let mut r = rng::seeded(seed);
    let mut err: f64 = 0.0;
    for _ in 0..8 {
        let z = rng::uniform(&mut r, -6.0, 6.0);
        let y = if rng::coin(&mut r) { 1.0 } else { 0.0 };
        let zt = Tensor::from_vec(&[1], vec![z]).unwrap();
        let numeric = numeric_grad(&zt, |z| bce_loss(sigmoid(z.data()[0]), y));
        err = err.max(rel_err(sigmoid(z) - y, numeric[0]));
    }
    GradTrial {
        name: "sigmoid+bce".into(),
        max_rel_err: err,
        checked: 8,
    }
}

/// 12×12×3 model with the walkthrough's layer kinds, plus max pooling.
pub fn shrunken_specs(with_pool: bool) -> Vec<LayerSpec> {
    let mut specs = vec![
        LayerSpec::Conv {
            f: 3,
            s: 1,
            p: 0,
            n_filters: 4,
        },
        LayerSpec::Relu,
        LayerSpec::Conv {
            f: 4,
            s: 2,
            p: 0,
            n_filters: 5,
        },
        LayerSpec::Relu,
    ];
    if with_pool {
        specs[2] = LayerSpec::Conv {
            f: 3,
            s: 1,
            p: 1,
            n_filters: 5,
        };
        specs.push(LayerSpec::MaxPool { window: 2 });
    }
    specs.extend([
        LayerSpec::Flatten,
        LayerSpec::Dense { out: 1 },
        LayerSpec::Sigmoid,
    ]);
    specs
}

fn relu_pattern(model: &Model, x: &Tensor) -> Vec<bool> {
    let trace = model.forward_trace(x).unwrap();
    let mut pattern = Vec::new();
    for (i, layer) in model.layers().iter().enumerate() {
        if matches!(layer, Layer::Relu) {
            let input = if i == 0 { x } else { &trace[i - 1] };
            pattern.extend(input.data().iter().map(|&v| v > 0.0));
        }
    }
    pattern
}

/// Every parameter of the shrunken model against central differences of the
/// loss. Coordinates whose perturbation flips any ReLU are skipped.
pub fn model_grad_trial(seed: u64, with_pool: bool) -> GradTrial {
    let mut r = rng::seeded(seed);
    let model = Model::build(&[12, 12, 3], &shrunken_specs(with_pool), seed).unwrap();
    let x = random_tensor(&[12, 12, 3], 0.0, 1.0, &mut r);
    let y = if rng::coin(&mut r) { 1.0 } else { 0.0 };
    let pass = model.backward(&x, y).unwrap();
    let base = relu_pattern(&model, &x);

    let (mut err, mut checked) = (0.0_f64, 0);
    let mut probe = model.clone();
    for li in 0..model.layers().len() {
        let Some(grads) = &pass.grads.layers[li] else {
            continue;
        };
        for (which, analytic) in [(0, &grads.w), (1, &grads.b)] {
            for k in 0..analytic.len() {
                let mut eval = |delta: f64| {
                    let p = probe.layers_mut()[li].params_mut().unwrap();
                    let t = if which == 0 { &mut p.w } else { &mut p.b };
                    let v = t.data()[k];
                    t.data_mut()[k] = v + delta;
                    let loss = bce_loss(probe.forward(&x).unwrap(), y);
                    let same = relu_pattern(&probe, &x) == base;
                    let p = probe.layers_mut()[li].params_mut().unwrap();
                    let t = if which == 0 { &mut p.w } else { &mut p.b };
                    t.data_mut()[k] = v;
                    (loss, same)
                };
                let (up, same_up) = eval(FD_STEP);
                let (down, same_down) = eval(-FD_STEP);
                if !(same_up && same_down) {
                    continue;
                }
                err = err.max(rel_err(analytic.data()[k], (up - down) / (2.0 * FD_STEP)));
                checked += 1;
            }
        }
    }
    GradTrial {
        name: format!("model 12x12x3{}", if with_pool { " +maxpool" } else { "" }),
        max_rel_err: err,
        checked,
    }
}

/// The full gradient suite: 28 trials across every layer kind and the
/// shrunken model.
pub fn gradient_suite() -> Vec<GradTrial> {
    let mut trials = Vec::new();
    for s in 0..8 {
        trials.push(conv_grad_trial(100 + s));
    }
    for s in 0..4 {
        trials.push(relu_grad_trial(200 + s));
        trials.push(maxpool_grad_trial(300 + s));
        trials.push(dense_grad_trial(400 + s));
        trials.push(sigmoid_bce_grad_trial(500 + s));
    }
    for s in 0..4 {
        trials.push(model_grad_trial(600 + s, s % 2 == 1));
    }
    trials
}

/// `out[r][c] = in[c][n-1-r]`: a counter-clockwise quarter turn as a pure
/// index permutation.
pub fn rot90_oracle(img: &Tensor) -> Tensor {
    let (n, c) = (img.shape()[0], img.shape()[2]);
    assert_eq!(img.shape()[1], n);
    let mut out = img.zeros_like();
    for r in 0..n {
        for col in 0..n {
            for ch in 0..c {
                out.set(&[r, col, ch], img.get(&[col, n - 1 - r, ch]).unwrap())
                    .unwrap();
            }
        }
    }
    out
}

pub fn affine_near(a: &AffineTransform, b: &AffineTransform, tol: f64) -> bool {
    a.max_abs_diff(b) <= tol
}

/// Quarter-turn warps of square images against the permutation oracle.
pub fn rot90_matches(seed: u64) -> bool {
    let mut r = rng::seeded(seed);
    let xf = affine_rotation(std::f64::consts::FRAC_PI_2).unwrap();
    [1, 2, 3, 5, 8, 40].iter().all(|&n| {
        let img = random_tensor(&[n, n, 3], 0.0, 1.0, &mut r);
        warp(&img, &xf, 0.0).unwrap() == rot90_oracle(&img)
    })
}

pub fn recipe_check(recipe: Recipe, seed: u64) -> Result<(), String> {
    let cfg = AugmentConfig {
        seed,
        ..AugmentConfig::recipe(recipe)
    };
    let img = weldcnn_core::data::synth_generate(Label::Ge80, seed).image;
    for i in 0..9 {
        let run = || {
            let mut r = rng::seeded(rng::derive_seed(seed, i));
            random_augment(&img, &cfg, &mut r).unwrap()
        };
        let (a, b) = (run(), run());
        if a.shape() != IMAGE_SHAPE {
            return Err(format!("{recipe:?}: shape {:?}", a.shape()));
        }
        if let Some(v) = a.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(format!("{recipe:?}: value {v} outside [0, 1]"));
        }
        if a.data()
            .iter()
            .zip(b.data())
            .any(|(x, y)| x.to_bits() != y.to_bits())
        {
            return Err(format!("{recipe:?}: runs differ for draw {i}"));
        }
    }
    Ok(())
}
