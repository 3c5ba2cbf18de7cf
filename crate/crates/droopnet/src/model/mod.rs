//! The noise predictor: two image-to-image subnets around a shared-weight
//! fusion stage that collapses a variable-length sequence of tile current
//! maps into fixed-size summary channels.

pub mod checkpoint;
pub mod config;
pub mod fusion;
pub mod predictor;
pub mod unet;

pub use checkpoint::{load_model, save_model};
pub use config::ModelConfig;
pub use fusion::{FusionGrads, FusionSubnet, FusionTape};
pub use predictor::{Model, ModelGrads, ModelTape};
pub use unet::{UNet, UNetGrads, UNetTape};
