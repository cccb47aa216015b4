//! Network layers, the sequential model and the optimizer.

pub mod conv;
pub mod layers;
pub mod model;
pub mod optim;

pub use conv::{
    conv2d_backward, conv2d_backward_params, conv2d_forward, conv2d_forward_fast, conv_out_size,
    ConvGrads, ConvSpec, LayerParams,
};
pub use layers::{
    bce_loss, dense_backward, dense_forward, maxpool_backward, maxpool_forward, relu_backward,
    relu_forward, sigmoid, DenseGrads, PoolRecord,
};
pub use model::{
    build_paper_model, BackwardPass, Gradients, Layer, LayerSpec, Model, PAPER_INPUT_SHAPE,
    PAPER_LAYERS,
};
pub use optim::{sgd_step, Sgd};
