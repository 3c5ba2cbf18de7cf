//! Current-map fusion subnet.
//!
//! Every compressed current map passes individually through a small
//! single-channel encoder-decoder (stride-2 conv, stride-1 conv, stride-2
//! transposed conv, linear stride-1 output conv); the per-map outputs are
//! then reduced tile-wise into three summary maps: max, mean of extremes,
//! and μ+3σ. The maps ride the tensor lane dimension, so one pass evaluates
//! the whole sequence with shared weights; sequence length is free to vary.
//!
//! `bypass` skips the learned network and aggregates the raw maps directly —
//! an alternative reading of the design kept behind a flag (default off).

use crate::nn::{
    lane_aggregate, lane_aggregate_backward, relu, relu_backward, ConvLayer, DeconvLayer,
    LaneAggregates, LayerGrads, Pad, Tensor,
};

#[derive(Debug, Clone, PartialEq)]
pub struct FusionSubnet {
    pub enc2: ConvLayer,
    pub enc1: ConvLayer,
    pub dec: DeconvLayer,
    pub out: ConvLayer,
    pub bypass: bool,
}

/// Saved activations for the backward pass.
#[derive(Debug, Clone)]
pub struct FusionTape {
    x0: Tensor,
    a1: Option<Tensor>,
    a2: Option<Tensor>,
    a3: Option<Tensor>,
    f: Tensor,
    agg: LaneAggregates,
}

#[derive(Debug, Clone)]
pub struct FusionGrads {
    pub enc2: LayerGrads,
    pub enc1: LayerGrads,
    pub dec: LayerGrads,
    pub out: LayerGrads,
}

impl FusionTape {
    pub fn aggregates(&self) -> &LaneAggregates {
        &self.agg
    }
}

impl FusionSubnet {
    pub fn new(channels: usize, k: usize, bypass: bool) -> Self {
        FusionSubnet {
            enc2: ConvLayer::new(1, channels, k, 2, Pad::Replicate),
            enc1: ConvLayer::new(channels, channels, k, 1, Pad::Replicate),
            dec: DeconvLayer::new(channels, channels, k),
            out: ConvLayer::new(channels, 1, k, 1, Pad::Replicate),
            bypass,
        }
    }

    /// `maps`: `(1, h, w, K)` — K current maps on the lanes. Returns the
    /// three `(1, h, w, 1)` aggregate maps inside the tape.
    pub fn forward(&self, maps: &Tensor) -> FusionTape {
        assert_eq!(maps.c, 1, "fusion input must be single-channel");
        assert!(maps.lanes >= 1, "empty map sequence");
        if self.bypass {
            let agg = lane_aggregate(maps);
            return FusionTape {
                x0: maps.clone(),
                a1: None,
                a2: None,
                a3: None,
                f: maps.clone(),
                agg,
            };
        }
        let a1 = relu(&self.enc2.forward(maps));
        let a2 = relu(&self.enc1.forward(&a1));
        let a3 = relu(&self.dec.forward(&a2, maps.h, maps.w));
        let f = self.out.forward(&a3);
        let agg = lane_aggregate(&f);
        FusionTape { x0: maps.clone(), a1: Some(a1), a2: Some(a2), a3: Some(a3), f, agg }
    }

    /// Backward from the three aggregate-map gradients. Returns parameter
    /// grads (`None` in bypass mode, which has no parameters in play).
    pub fn backward(
        &self,
        tape: &FusionTape,
        g_max: &Tensor,
        g_mean: &Tensor,
        g_msd: &Tensor,
    ) -> Option<FusionGrads> {
        let gf = lane_aggregate_backward(&tape.f, &tape.agg, g_max, g_mean, g_msd);
        if self.bypass {
            return None;
        }
        let a3 = tape.a3.as_ref().unwrap();
        let a2 = tape.a2.as_ref().unwrap();
        let a1 = tape.a1.as_ref().unwrap();
        let (g_a3, grads_out) = self.out.backward(a3, &gf);
        let g_a3 = relu_backward(&g_a3, a3);
        let (g_a2, grads_dec) = self.dec.backward(a2, &g_a3);
        let g_a2 = relu_backward(&g_a2, a2);
        let (g_a1, grads_enc1) = self.enc1.backward(a1, &g_a2);
        let g_a1 = relu_backward(&g_a1, a1);
        let (_, grads_enc2) = self.enc2.backward(&tape.x0, &g_a1);
        Some(FusionGrads { enc2: grads_enc2, enc1: grads_enc1, dec: grads_dec, out: grads_out })
    }

    /// Canonical parameter order: enc2, enc1, dec, out (weights before bias).
    pub fn param_tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        vec![
            &mut self.enc2.weights,
            &mut self.enc2.bias,
            &mut self.enc1.weights,
            &mut self.enc1.bias,
            &mut self.dec.weights,
            &mut self.dec.bias,
            &mut self.out.weights,
            &mut self.out.bias,
        ]
    }

    pub fn param_tensors(&self) -> Vec<&Vec<f64>> {
        vec![
            &self.enc2.weights,
            &self.enc2.bias,
            &self.enc1.weights,
            &self.enc1.bias,
            &self.dec.weights,
            &self.dec.bias,
            &self.out.weights,
            &self.out.bias,
        ]
    }
}

impl FusionGrads {
    pub fn tensors(&self) -> Vec<&Vec<f64>> {
        vec![
            &self.enc2.weights,
            &self.enc2.bias,
            &self.enc1.weights,
            &self.enc1.bias,
            &self.dec.weights,
            &self.dec.bias,
            &self.out.weights,
            &self.out.bias,
        ]
    }

    pub fn add(&mut self, other: &FusionGrads) {
        for (d, s) in [
            (&mut self.enc2, &other.enc2),
            (&mut self.enc1, &other.enc1),
            (&mut self.dec, &other.dec),
            (&mut self.out, &other.out),
        ] {
            for (a, b) in d.weights.iter_mut().zip(&s.weights) {
                *a += b;
            }
            for (a, b) in d.bias.iter_mut().zip(&s.bias) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for d in [&mut self.enc2, &mut self.enc1, &mut self.dec, &mut self.out] {
            for a in d.weights.iter_mut().chain(d.bias.iter_mut()) {
                *a *= factor;
            }
        }
    }
}
