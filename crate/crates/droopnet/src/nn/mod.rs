//! Minimal deterministic neural-network kernel: dense f64 tensors, 2-D
//! convolution and transposed convolution with reverse-mode gradients, ReLU,
//! channel concatenation, L1 loss, lane aggregation, and Adam.
//!
//! Everything is single-precision-free and allocation-explicit: no autodiff
//! graph, just layer structs with `forward`/`backward` pairs whose gradients
//! are verified against central finite differences in the test suite.

pub mod adam;
pub mod conv;
pub mod deconv;
pub mod gradcheck;
pub mod ops;
pub mod tensor;

pub use adam::Adam;
pub use conv::{ConvLayer, LayerGrads, Pad};
pub use deconv::DeconvLayer;
pub use ops::{
    concat_channels, l1_loss, lane_aggregate, lane_aggregate_backward, relu, relu_backward,
    split_channels, LaneAggregates,
};
pub use tensor::{axpy, dot, sum, Tensor};
