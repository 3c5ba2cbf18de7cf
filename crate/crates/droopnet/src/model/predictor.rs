//! The assembled worst-case noise predictor.
//!
//! Three subnets run jointly: a U-Net reduces the `(B, n, m)` bump-distance
//! tensor to one map; the fusion subnet turns the compressed current-map
//! sequence into three aggregate maps; a second U-Net maps the four
//! concatenated maps to the predicted noise map, denormalized to volts.
//! Inference cost depends only on (m, n, B, sequence length) — never on the
//! node count of the underlying grid.

use super::config::ModelConfig;
use super::fusion::{FusionGrads, FusionSubnet, FusionTape};
use super::unet::{UNet, UNetGrads, UNetTape};
use crate::error::{Error, Result};
use crate::features::{DistanceTensor, FeatureStats};
use crate::nn::{concat_channels, split_channels, ConvLayer, DeconvLayer, Tensor};
use crate::rng::{purpose, stream};
use crate::sim::NoiseMap;
use crate::tiling::TileCurrentMaps;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub stats: FeatureStats,
    pub distance_net: UNet,
    pub fusion: FusionSubnet,
    pub noise_net: UNet,
}

/// Saved activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ModelTape {
    dist: UNetTape,
    fusion: FusionTape,
    noise: UNetTape,
}

/// Full-model parameter gradients.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub distance: UNetGrads,
    pub fusion: FusionGrads,
    pub noise: UNetGrads,
}

fn init_conv(layer: &mut ConvLayer, rng: &mut ChaCha8Rng) {
    let bound = 1.0 / ((layer.in_c * layer.k * layer.k) as f64).sqrt();
    for w in layer.weights.iter_mut() {
        *w = rng.gen_range(-bound..bound);
    }
    layer.bias.fill(0.0);
}

fn init_deconv(layer: &mut DeconvLayer, rng: &mut ChaCha8Rng) {
    let bound = 1.0 / ((layer.in_c * layer.k * layer.k) as f64).sqrt();
    for w in layer.weights.iter_mut() {
        *w = rng.gen_range(-bound..bound);
    }
    layer.bias.fill(0.0);
}

fn init_unet(net: &mut UNet, rng: &mut ChaCha8Rng) {
    for (s2, s1) in net.down.iter_mut() {
        init_conv(s2, rng);
        init_conv(s1, rng);
    }
    for (dec, conv) in net.up.iter_mut() {
        init_deconv(dec, rng);
        init_conv(conv, rng);
    }
    init_conv(&mut net.output, rng);
}

impl Model {
    /// Build a model with fan-in-scaled uniform weights drawn from the
    /// config seed (biases start at zero).
    pub fn new(config: ModelConfig, stats: FeatureStats) -> Result<Model> {
        config.validate()?;
        stats.validate()?;
        let distance_net = UNet::new(config.b, config.c1, config.depth, config.kernel);
        let fusion = FusionSubnet::new(config.c2, config.kernel, config.fusion_bypass);
        let noise_net = UNet::new(4, config.c3, config.depth, config.kernel);
        let mut model = Model { config, stats, distance_net, fusion, noise_net };
        model.init_weights();
        Ok(model)
    }

    /// Re-draw all weights from the config seed (canonical layer order).
    pub fn init_weights(&mut self) {
        let mut rng = stream(self.config.seed, purpose::WEIGHT_INIT, 0);
        init_unet(&mut self.distance_net, &mut rng);
        init_conv(&mut self.fusion.enc2, &mut rng);
        init_conv(&mut self.fusion.enc1, &mut rng);
        init_deconv(&mut self.fusion.dec, &mut rng);
        init_conv(&mut self.fusion.out, &mut rng);
        init_unet(&mut self.noise_net, &mut rng);
    }

    /// Warm-start the output layer so the initial prediction sits near a
    /// given noise level (in normalized units).
    pub fn set_output_bias(&mut self, bias_norm: f64) {
        self.noise_net.output.bias[0] = bias_norm;
    }

    pub fn param_count(&self) -> usize {
        self.param_tensors().iter().map(|t| t.len()).sum()
    }

    /// All parameter tensors in canonical order: distance net, fusion net,
    /// noise net. Checkpoints and the optimizer rely on this order.
    pub fn param_tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut v = self.distance_net.param_tensors_mut();
        v.extend(self.fusion.param_tensors_mut());
        v.extend(self.noise_net.param_tensors_mut());
        v
    }

    pub fn param_tensors(&self) -> Vec<&Vec<f64>> {
        let mut v = self.distance_net.param_tensors();
        v.extend(self.fusion.param_tensors());
        v.extend(self.noise_net.param_tensors());
        v
    }

    /// Normalize the bump-distance tensor into a `(B, n, m, 1)` input.
    pub fn normalize_distance(&self, d: &DistanceTensor) -> Result<Tensor> {
        if d.b != self.config.b || d.m != self.config.m || d.n != self.config.n {
            return Err(Error::ShapeMismatch(format!(
                "distance tensor ({}, {}, {}) does not match model ({}, {}, {})",
                d.b, d.n, d.m, self.config.b, self.config.n, self.config.m
            )));
        }
        let scale = self.stats.distance_scale;
        let data = d.values_um.iter().map(|v| v * scale).collect();
        Ok(Tensor::from_vec(d.b, d.n, d.m, 1, data))
    }

    /// Normalize a compressed current-map sequence into a `(1, n, m, K)`
    /// lane tensor.
    pub fn normalize_maps(&self, maps: &TileCurrentMaps) -> Result<Tensor> {
        if maps.m != self.config.m || maps.n != self.config.n {
            return Err(Error::ShapeMismatch(format!(
                "current maps are {}×{}, model wants {}×{}",
                maps.m, maps.n, self.config.m, self.config.n
            )));
        }
        let k = maps.n_stamps();
        self.normalize_maps_f32_or_f64(k, |cell, stamp| maps.maps[stamp * self.cells() + cell])
    }

    /// Same as [`Model::normalize_maps`] for f32-stored stamp-major data.
    pub fn normalize_maps_f32(&self, maps: &[f32], n_stamps: usize) -> Result<Tensor> {
        if maps.len() != n_stamps * self.cells() {
            return Err(Error::ShapeMismatch(format!(
                "map stack length {} ≠ {} stamps × {} tiles",
                maps.len(),
                n_stamps,
                self.cells()
            )));
        }
        self.normalize_maps_f32_or_f64(n_stamps, |cell, stamp| {
            maps[stamp * self.cells() + cell] as f64
        })
    }

    fn cells(&self) -> usize {
        self.config.m * self.config.n
    }

    fn normalize_maps_f32_or_f64(
        &self,
        k: usize,
        get: impl Fn(usize, usize) -> f64,
    ) -> Result<Tensor> {
        if k == 0 {
            return Err(Error::Invalid("empty compressed map sequence".into()));
        }
        let cells = self.cells();
        let scale = self.stats.current_scale;
        let mut data = vec![0.0f64; cells * k];
        for cell in 0..cells {
            for stamp in 0..k {
                data[cell * k + stamp] = get(cell, stamp) * scale;
            }
        }
        Ok(Tensor::from_vec(1, self.config.n, self.config.m, k, data))
    }

    /// Joint forward pass; output is the predicted noise map in volts,
    /// shaped `(1, n, m, 1)`.
    pub fn forward(&self, dist_norm: &Tensor, maps_norm: &Tensor) -> (Tensor, ModelTape) {
        let (d_tilde, dist_tape) = self.distance_net.forward(dist_norm);
        let fusion_tape = self.fusion.forward(maps_norm);
        let agg = fusion_tape.aggregates();
        let x4 = concat_channels(
            &concat_channels(&concat_channels(&d_tilde, &agg.max), &agg.mean_extremes),
            &agg.msd,
        );
        let (v_norm, noise_tape) = self.noise_net.forward(&x4);
        let scale = self.stats.noise_scale_v;
        let v = Tensor {
            c: 1,
            h: v_norm.h,
            w: v_norm.w,
            lanes: 1,
            data: v_norm.data.iter().map(|x| x * scale).collect(),
        };
        (v, ModelTape { dist: dist_tape, fusion: fusion_tape, noise: noise_tape })
    }

    /// Reverse-mode pass from a volts-space output gradient.
    pub fn backward(&self, tape: &ModelTape, g_volts: &Tensor) -> ModelGrads {
        let scale = self.stats.noise_scale_v;
        let g_norm = Tensor {
            c: 1,
            h: g_volts.h,
            w: g_volts.w,
            lanes: 1,
            data: g_volts.data.iter().map(|x| x * scale).collect(),
        };
        let (g_x4, noise_grads) = self.noise_net.backward(&tape.noise, &g_norm);
        let (g_dt, rest) = split_channels(&g_x4, 1);
        let (g_max, rest) = split_channels(&rest, 1);
        let (g_mean, g_msd) = split_channels(&rest, 1);
        let (_, distance_grads) = self.distance_net.backward(&tape.dist, &g_dt);
        let fusion_grads = self
            .fusion
            .backward(&tape.fusion, &g_max, &g_mean, &g_msd)
            .unwrap_or_else(|| FusionGrads::zeros(&self.fusion));
        ModelGrads { distance: distance_grads, fusion: fusion_grads, noise: noise_grads }
    }

    /// Convenience inference wrapper producing a [`NoiseMap`].
    pub fn predict(&self, dist_norm: &Tensor, maps: &TileCurrentMaps) -> Result<NoiseMap> {
        let mn = self.normalize_maps(maps)?;
        let (v, _) = self.forward(dist_norm, &mn);
        Ok(NoiseMap { m: self.config.m, n: self.config.n, values_v: v.data })
    }
}

impl FusionGrads {
    fn zeros(net: &FusionSubnet) -> FusionGrads {
        let z = |w: &Vec<f64>, b: &Vec<f64>| crate::nn::LayerGrads {
            weights: vec![0.0; w.len()],
            bias: vec![0.0; b.len()],
        };
        FusionGrads {
            enc2: z(&net.enc2.weights, &net.enc2.bias),
            enc1: z(&net.enc1.weights, &net.enc1.bias),
            dec: z(&net.dec.weights, &net.dec.bias),
            out: z(&net.out.weights, &net.out.bias),
        }
    }
}

impl ModelGrads {
    /// Same canonical order as [`Model::param_tensors_mut`].
    pub fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut v = self.distance.tensors();
        v.extend(self.fusion.tensors());
        v.extend(self.noise.tensors());
        v
    }

    pub fn add(&mut self, other: &ModelGrads) {
        self.distance.add(&other.distance);
        self.fusion.add(&other.fusion);
        self.noise.add(&other.noise);
    }

    pub fn scale(&mut self, factor: f64) {
        self.distance.scale(factor);
        self.fusion.scale(factor);
        self.noise.scale(factor);
    }
}
