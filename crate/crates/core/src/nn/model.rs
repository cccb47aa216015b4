use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};

use super::conv::{
    conv2d_backward, conv2d_backward_params, conv2d_forward_fast, ConvSpec, LayerParams,
};
use super::layers::{
    bce_loss, dense_backward, dense_forward, maxpool_backward, maxpool_forward,
    maxpool_output_shape, relu_backward, relu_forward, sigmoid, PoolRecord,
};
use crate::rng;
use crate::{Error, Result, Tensor};

/// Architecture description of one layer, without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        f: usize,
        s: usize,
        p: usize,
        n_filters: usize,
    },
    Relu,
    MaxPool {
        window: usize,
    },
    Flatten,
    Dense {
        out: usize,
    },
    Sigmoid,
}

/// A layer together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv { spec: ConvSpec, params: LayerParams },
    Relu,
    MaxPool { window: usize },
    Flatten,
    Dense { params: LayerParams },
    Sigmoid,
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv { .. } => "conv",
            Layer::Relu => "relu",
            Layer::MaxPool { .. } => "maxpool",
            Layer::Flatten => "flatten",
            Layer::Dense { .. } => "dense",
            Layer::Sigmoid => "sigmoid",
        }
    }

    pub fn params(&self) -> Option<&LayerParams> {
        match self {
            Layer::Conv { params, .. } | Layer::Dense { params } => Some(params),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<&mut LayerParams> {
        match self {
            Layer::Conv { params, .. } | Layer::Dense { params } => Some(params),
            _ => None,
        }
    }

    /// Output shape for the given input shape, checking parameter shapes.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Conv { spec, params } => {
                let out = spec.output_shape(input)?;
                if params.w.shape() != spec.weight_shape() || params.b.shape() != [spec.n_filters] {
                    return Err(Error::Shape(format!(
                        "parameters {:?}/{:?} do not match {spec:?}",
                        params.w.shape(),
                        params.b.shape()
                    )));
                }
                Ok(out.to_vec())
            }
            Layer::Relu => Ok(input.to_vec()),
            Layer::MaxPool { window } => Ok(maxpool_output_shape(input, *window)?.to_vec()),
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::Dense { params } => match (input, params.w.shape(), params.b.shape()) {
                (&[n], &[out, inp], &[bo]) if n == inp && bo == out => Ok(vec![out]),
                _ => Err(Error::Shape(format!(
                    "dense parameters {:?}/{:?} do not accept input {input:?}",
                    params.w.shape(),
                    params.b.shape()
                ))),
            },
            Layer::Sigmoid => match input {
                [1] => Ok(vec![1]),
                _ => Err(Error::Shape(format!(
                    "sigmoid head expects a single logit, got {input:?}"
                ))),
            },
        }
    }
}

fn at_layer(index: usize, layer: &Layer, err: Error) -> Error {
    match err {
        Error::Shape(msg) => Error::Shape(format!("layer {index} ({}): {msg}", layer.kind())),
        other => other,
    }
}

/// Per-layer parameter gradients, `None` for parameterless layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Option<LayerParams>>,
}

impl Gradients {
    pub fn zeros_for(model: &Model) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| l.params().map(LayerParams::zeros_like))
                .collect(),
        }
    }

    /// Elementwise `self += other`.
    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::Shape(
                "gradient sets have different layer counts".to_string(),
            ));
        }
        for (mine, theirs) in self.layers.iter_mut().zip(&other.layers) {
            match (mine, theirs) {
                (Some(a), Some(b)) => {
                    a.w.check_same_shape(&b.w)?;
                    a.b.check_same_shape(&b.b)?;
                    for (x, y) in a.w.data_mut().iter_mut().zip(b.w.data()) {
                        *x += y;
                    }
                    for (x, y) in a.b.data_mut().iter_mut().zip(b.b.data()) {
                        *x += y;
                    }
                }
                (None, None) => {}
                _ => {
                    return Err(Error::Shape(
                        "gradient sets have different layouts".to_string(),
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for p in self.layers.iter_mut().flatten() {
            p.w.data_mut().iter_mut().for_each(|v| *v *= factor);
            p.b.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Result of one forward/backward pass on a single labelled input.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardPass {
    pub probability: f64,
    pub loss: f64,
    pub grads: Gradients,
}

/// A feed-forward stack of layers ending in a single sigmoid unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
}

enum Cache {
    Input(Tensor),
    Pool(PoolRecord),
    Shape(Vec<usize>),
    None,
}

impl Model {
    /// Checks that the layer shapes chain and the stack ends in a sigmoid on a
    /// single logit.
    pub fn from_layers(input_shape: &[usize], layers: Vec<Layer>) -> Result<Self> {
        Tensor::zeros(input_shape)?;
        let model = Self {
            input_shape: input_shape.to_vec(),
            layers,
        };
        model.shape_chain()?;
        let last = model.layers.len().checked_sub(1);
        let sigmoid_at: Vec<usize> = model
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, Layer::Sigmoid))
            .map(|(i, _)| i)
            .collect();
        if sigmoid_at.len() != 1 || sigmoid_at.first().copied() != last {
            return Err(Error::Shape(
                "model must end in exactly one sigmoid layer".to_string(),
            ));
        }
        Ok(model)
    }

    /// He-normal weights (std `sqrt(2 / fan_in)`) and zero biases drawn from
    /// `seed`, layer by layer in order.
    pub fn build(input_shape: &[usize], specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = rng::seeded(seed);
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for (index, spec) in specs.iter().enumerate() {
            let layer = match *spec {
                LayerSpec::Conv { f, s, p, n_filters } => {
                    let c_in = *shape.last().unwrap_or(&0);
                    let spec = ConvSpec {
                        f,
                        s,
                        p,
                        c_in,
                        n_filters,
                    };
                    spec.validate()?;
                    let w = he_normal(&spec.weight_shape(), spec.fan_in(), &mut rng)?;
                    Layer::Conv {
                        spec,
                        params: LayerParams {
                            w,
                            b: Tensor::zeros(&[n_filters])?,
                        },
                    }
                }
                LayerSpec::Dense { out } => {
                    let &[inp] = shape.as_slice() else {
                        return Err(Error::Shape(format!(
                            "layer {index} (dense): expects a flattened vector, got {shape:?}"
                        )));
                    };
                    Layer::Dense {
                        params: LayerParams {
                            w: he_normal(&[out, inp], inp, &mut rng)?,
                            b: Tensor::zeros(&[out])?,
                        },
                    }
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::MaxPool { window } => Layer::MaxPool { window },
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::Sigmoid => Layer::Sigmoid,
            };
            shape = layer
                .output_shape(&shape)
                .map_err(|e| at_layer(index, &layer, e))?;
            layers.push(layer);
        }
        Self::from_layers(input_shape, layers)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .map(LayerParams::param_count)
            .sum()
    }

    /// Statically inferred shapes: the input followed by each layer's output.
    pub fn shape_chain(&self) -> Result<Vec<Vec<usize>>> {
        let mut chain = vec![self.input_shape.clone()];
        for (index, layer) in self.layers.iter().enumerate() {
            let next = layer
                .output_shape(chain.last().expect("chain starts non-empty"))
                .map_err(|e| at_layer(index, layer, e))?;
            chain.push(next);
        }
        Ok(chain)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(Error::Shape(format!(
                "model expects input {:?}, got {:?}",
                self.input_shape,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Every intermediate activation, starting with the input itself.
    pub fn forward_trace(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for (index, layer) in self.layers.iter().enumerate() {
            let input = acts.last().expect("trace starts non-empty");
            let (out, _) = self
                .layer_forward(layer, input)
                .map_err(|e| at_layer(index, layer, e))?;
            acts.push(out);
        }
        Ok(acts)
    }

    /// Probability of the "efficiency ≥ 80%" class.
    pub fn forward(&self, x: &Tensor) -> Result<f64> {
        self.check_input(x)?;
        let mut act = x.clone();
        for (index, layer) in self.layers.iter().enumerate() {
            act = self
                .layer_forward(layer, &act)
                .map_err(|e| at_layer(index, layer, e))?
                .0;
        }
        Ok(act.data()[0])
    }

    fn layer_forward(&self, layer: &Layer, x: &Tensor) -> Result<(Tensor, Cache)> {
        Ok(match layer {
            Layer::Conv { spec, params } => (
                conv2d_forward_fast(x, spec, params)?,
                Cache::Input(x.clone()),
            ),
            Layer::Relu => (relu_forward(x), Cache::Input(x.clone())),
            Layer::MaxPool { window } => {
                let (y, rec) = maxpool_forward(x, *window)?;
                (y, Cache::Pool(rec))
            }
            Layer::Flatten => (x.reshape(&[x.len()])?, Cache::Shape(x.shape().to_vec())),
            Layer::Dense { params } => (dense_forward(x, params)?, Cache::Input(x.clone())),
            Layer::Sigmoid => {
                layer.output_shape(x.shape())?;
                (x.map(sigmoid), Cache::None)
            }
        })
    }

    /// Loss and parameter gradients of binary cross-entropy against target
    /// `y ∈ {0, 1}`.
    pub fn backward(&self, x: &Tensor, y: f64) -> Result<BackwardPass> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut act = x.clone();
        for (index, layer) in self.layers.iter().enumerate() {
            let (out, cache) = self
                .layer_forward(layer, &act)
                .map_err(|e| at_layer(index, layer, e))?;
            caches.push(cache);
            act = out;
        }
        let probability = act.data()[0];
        let loss = bce_loss(probability, y);

        let mut grads = vec![None; self.layers.len()];
        // d(bce ∘ sigmoid)/dz = p - y
        let mut grad = Tensor::from_vec(&[1], vec![probability - y])?;
        for (index, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            let wrap = |e| at_layer(index, layer, e);
            grad = match (layer, cache) {
                (Layer::Sigmoid, _) => grad,
                (Layer::Conv { spec, params }, Cache::Input(input)) => {
                    if index == 0 {
                        grads[index] = Some(
                            conv2d_backward_params(&input, spec, params, &grad).map_err(wrap)?,
                        );
                        break;
                    }
                    let g = conv2d_backward(&input, spec, params, &grad).map_err(wrap)?;
                    grads[index] = Some(g.params);
                    g.x
                }
                (Layer::Relu, Cache::Input(input)) => relu_backward(&input, &grad).map_err(wrap)?,
                (Layer::MaxPool { .. }, Cache::Pool(rec)) => {
                    maxpool_backward(&rec, &grad).map_err(wrap)?
                }
                (Layer::Flatten, Cache::Shape(shape)) => grad.into_shape(&shape).map_err(wrap)?,
                (Layer::Dense { params }, Cache::Input(input)) => {
                    let g = dense_backward(&input, params, &grad).map_err(wrap)?;
                    grads[index] = Some(g.params);
                    g.x
                }
                _ => unreachable!("cache kind always matches its layer"),
            };
        }
        Ok(BackwardPass {
            probability,
            loss,
            grads: Gradients { layers: grads },
        })
    }
}

fn he_normal(shape: &[usize], fan_in: usize, rng: &mut rng::Rng) -> Result<Tensor> {
    let std = libm::sqrt(2.0 / fan_in as f64);
    let normal = Normal::new(0.0, std)
        .map_err(|e| Error::Argument(format!("bad initialisation scale {std}: {e}")))?;
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| normal.sample(rng)).collect())
}

/// Layer stack of the 40×40×3 walkthrough: ten 3×3 stride-1 filters, twenty
/// 6×6 stride-2 filters, flatten to 5780 features, one sigmoid unit.
pub const PAPER_LAYERS: [LayerSpec; 7] = [
    LayerSpec::Conv {
        f: 3,
        s: 1,
        p: 0,
        n_filters: 10,
    },
    LayerSpec::Relu,
    LayerSpec::Conv {
        f: 6,
        s: 2,
        p: 0,
        n_filters: 20,
    },
    LayerSpec::Relu,
    LayerSpec::Flatten,
    LayerSpec::Dense { out: 1 },
    LayerSpec::Sigmoid,
];

pub const PAPER_INPUT_SHAPE: [usize; 3] = [40, 40, 3];

pub fn build_paper_model(seed: u64) -> Model {
    Model::build(&PAPER_INPUT_SHAPE, &PAPER_LAYERS, seed)
        .expect("walkthrough architecture is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walkthrough_chain() {
        let m = build_paper_model(1);
        let chain = m.shape_chain().unwrap();
        let expected: [&[usize]; 8] = [
            &[40, 40, 3],
            &[38, 38, 10],
            &[38, 38, 10],
            &[17, 17, 20],
            &[17, 17, 20],
            &[5780],
            &[1],
            &[1],
        ];
        assert_eq!(chain.len(), expected.len());
        for (got, want) in chain.iter().zip(expected) {
            assert_eq!(got.as_slice(), want);
        }
        assert_eq!(m.param_count(), 10 * 27 + 10 + 20 * 360 + 20 + 5780 + 1);
    }

    #[test]
    fn runtime_shapes_match_static_chain() {
        let m = build_paper_model(2);
        let x = Tensor::full(&[40, 40, 3], 0.5).unwrap();
        let trace = m.forward_trace(&x).unwrap();
        let chain = m.shape_chain().unwrap();
        for (t, s) in trace.iter().zip(&chain) {
            assert_eq!(t.shape(), s.as_slice());
        }
        let p = m.forward(&x).unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert_eq!(p, trace.last().unwrap().data()[0]);
    }

    #[test]
    fn same_seed_same_weights() {
        assert_eq!(build_paper_model(9), build_paper_model(9));
        assert_ne!(build_paper_model(9), build_paper_model(10));
    }

    #[test]
    fn he_scale_is_plausible() {
        let m = build_paper_model(4);
        let Layer::Conv { params, .. } = &m.layers()[2] else {
            panic!()
        };
        let n = params.w.len() as f64;
        let var = params.w.data().iter().map(|v| v * v).sum::<f64>() / n;
        let expected = 2.0 / 360.0;
        assert!((var - expected).abs() < 0.1 * expected, "var {var}");
        assert!(params.b.data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let m = build_paper_model(0);
        let x = Tensor::zeros(&[12, 12, 3]).unwrap();
        assert!(matches!(m.forward(&x), Err(Error::Shape(_))));
        assert!(m.backward(&x, 1.0).is_err());
    }

    #[test]
    fn invalid_stacks_are_rejected() {
        let no_head = [LayerSpec::Flatten, LayerSpec::Dense { out: 1 }];
        assert!(Model::build(&[4, 4, 1], &no_head, 0).is_err());
        let wide_head = [
            LayerSpec::Flatten,
            LayerSpec::Dense { out: 2 },
            LayerSpec::Sigmoid,
        ];
        assert!(Model::build(&[4, 4, 1], &wide_head, 0).is_err());
        let too_big = [
            LayerSpec::Conv {
                f: 5,
                s: 1,
                p: 0,
                n_filters: 2,
            },
            LayerSpec::Flatten,
            LayerSpec::Dense { out: 1 },
            LayerSpec::Sigmoid,
        ];
        let err = Model::build(&[4, 4, 1], &too_big, 0).unwrap_err();
        assert!(
            matches!(&err, Error::Shape(msg) if msg.contains("layer 0")),
            "{err}"
        );
    }

    #[test]
    fn masked_region_does_not_matter() {
        // Only the first pixel reaches the output when every other weight of
        // a 1×1 conv + dense head is zero.
        let conv = ConvSpec {
            f: 1,
            s: 1,
            p: 0,
            c_in: 1,
            n_filters: 1,
        };
        let mut dense_w = Tensor::zeros(&[1, 9]).unwrap();
        dense_w.set(&[0, 0], 1.5).unwrap();
        let m = Model::from_layers(
            &[3, 3, 1],
            vec![
                Layer::Conv {
                    spec: conv,
                    params: LayerParams {
                        w: Tensor::full(&[1, 1, 1, 1], 2.0).unwrap(),
                        b: Tensor::zeros(&[1]).unwrap(),
                    },
                },
                Layer::Flatten,
                Layer::Dense {
                    params: LayerParams {
                        w: dense_w,
                        b: Tensor::zeros(&[1]).unwrap(),
                    },
                },
                Layer::Sigmoid,
            ],
        )
        .unwrap();
        let mut a = Tensor::full(&[3, 3, 1], 0.1).unwrap();
        let mut b = Tensor::full(&[3, 3, 1], 0.9).unwrap();
        a.set(&[0, 0, 0], 0.4).unwrap();
        b.set(&[0, 0, 0], 0.4).unwrap();
        assert_eq!(m.forward(&a).unwrap(), m.forward(&b).unwrap());
    }

    #[test]
    fn backward_is_deterministic() {
        let m = build_paper_model(5);
        let x = Tensor::full(&[40, 40, 3], 0.3).unwrap();
        assert_eq!(m.backward(&x, 1.0).unwrap(), m.backward(&x, 1.0).unwrap());
    }
}
