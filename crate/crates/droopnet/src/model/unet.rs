//! Small U-Net encoder/decoder used by the distance-reduction and
//! noise-prediction subnets.
//!
//! Per down level: stride-2 conv then stride-1 conv (both replication-padded,
//! ReLU). The up path mirrors it: stride-2 transposed conv (zero-padded,
//! ReLU), concatenation with the same-size down feature (the raw input at the
//! top level), then a stride-1 conv. The output layer is a single-kernel
//! linear conv. `ceil`-mode sizing plus per-call deconv targets make any
//! input of 4×4 or larger work, odd sizes included.

use crate::nn::{
    concat_channels, relu, relu_backward, split_channels, ConvLayer, DeconvLayer, LayerGrads,
    Pad, Tensor,
};

#[derive(Debug, Clone, PartialEq)]
pub struct UNet {
    pub in_c: usize,
    pub channels: usize,
    /// (stride-2 conv, stride-1 conv) per down level.
    pub down: Vec<(ConvLayer, ConvLayer)>,
    /// (deconv, post-concat conv) per up step, deepest level first.
    pub up: Vec<(DeconvLayer, ConvLayer)>,
    /// Linear single-channel output layer.
    pub output: ConvLayer,
}

/// Activations saved by [`UNet::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct UNetTape {
    x0: Tensor,
    /// post-ReLU stride-2 conv outputs, per level
    a: Vec<Tensor>,
    /// post-ReLU stride-1 conv outputs (the skip features), per level
    b: Vec<Tensor>,
    /// post-ReLU deconv outputs, per up step
    u: Vec<Tensor>,
    /// post-ReLU up-conv outputs, per up step
    c: Vec<Tensor>,
}

/// Parameter gradients mirroring [`UNet`]'s layer list.
#[derive(Debug, Clone)]
pub struct UNetGrads {
    pub down: Vec<(LayerGrads, LayerGrads)>,
    pub up: Vec<(LayerGrads, LayerGrads)>,
    pub output: LayerGrads,
}

fn add_into(dst: &mut Tensor, src: &Tensor) {
    assert_eq!(dst.data.len(), src.data.len());
    for (d, s) in dst.data.iter_mut().zip(&src.data) {
        *d += s;
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(t) => add_into(t, &g),
        None => *slot = Some(g),
    }
}

impl UNet {
    pub fn new(in_c: usize, channels: usize, depth: usize, k: usize) -> Self {
        assert!(depth >= 1);
        let c = channels;
        let mut down = Vec::with_capacity(depth);
        for level in 0..depth {
            let first_in = if level == 0 { in_c } else { c };
            down.push((
                ConvLayer::new(first_in, c, k, 2, Pad::Replicate),
                ConvLayer::new(c, c, k, 1, Pad::Replicate),
            ));
        }
        let mut up = Vec::with_capacity(depth);
        for step in 0..depth {
            let level = depth - 1 - step;
            let partner_c = if level >= 1 { c } else { in_c };
            up.push((
                DeconvLayer::new(c, c, k),
                ConvLayer::new(c + partner_c, c, k, 1, Pad::Replicate),
            ));
        }
        UNet { in_c, channels: c, down, up, output: ConvLayer::new(c, 1, k, 1, Pad::Replicate) }
    }

    pub fn depth(&self) -> usize {
        self.down.len()
    }

    /// Partner feature for up step `step`: the same-size down-path skip, or
    /// the raw input at the top level.
    fn partner<'t>(&self, tape: &'t UNetTape, step: usize) -> &'t Tensor {
        let level = self.depth() - 1 - step;
        if level >= 1 {
            &tape.b[level - 1]
        } else {
            &tape.x0
        }
    }

    pub fn forward(&self, x0: &Tensor) -> (Tensor, UNetTape) {
        assert_eq!(x0.c, self.in_c, "input channel mismatch");
        let depth = self.depth();
        let mut a = Vec::with_capacity(depth);
        let mut b: Vec<Tensor> = Vec::with_capacity(depth);
        for level in 0..depth {
            let input = if level == 0 { x0 } else { &b[level - 1] };
            let ai = relu(&self.down[level].0.forward(input));
            let bi = relu(&self.down[level].1.forward(&ai));
            a.push(ai);
            b.push(bi);
        }
        let mut tape = UNetTape { x0: x0.clone(), a, b, u: Vec::new(), c: Vec::new() };
        for step in 0..depth {
            let cur = if step == 0 { &tape.b[depth - 1] } else { &tape.c[step - 1] };
            let partner = self.partner(&tape, step);
            let (dec, conv) = &self.up[step];
            let ui = relu(&dec.forward(cur, partner.h, partner.w));
            let cat = concat_channels(&ui, partner);
            let ci = relu(&conv.forward(&cat));
            tape.u.push(ui);
            tape.c.push(ci);
        }
        let out = self.output.forward(&tape.c[depth - 1]);
        (out, tape)
    }

    /// Reverse-mode pass: gradient w.r.t. the input plus all layer grads.
    pub fn backward(&self, tape: &UNetTape, gout: &Tensor) -> (Tensor, UNetGrads) {
        let depth = self.depth();
        let (mut g_cur, grads_output) = self.output.backward(&tape.c[depth - 1], gout);
        let mut skip_g: Vec<Option<Tensor>> = (0..depth).map(|_| None).collect();
        let mut gx0: Option<Tensor> = None;
        let mut up_grads: Vec<Option<(LayerGrads, LayerGrads)>> =
            (0..depth).map(|_| None).collect();
        for step in (0..depth).rev() {
            let level = depth - 1 - step;
            let (dec, conv) = &self.up[step];
            let partner = self.partner(tape, step);
            let g_c = relu_backward(&g_cur, &tape.c[step]);
            let cat = concat_channels(&tape.u[step], partner);
            let (g_cat, grads_conv) = conv.backward(&cat, &g_c);
            let (g_u, g_partner) = split_channels(&g_cat, self.channels);
            let g_u = relu_backward(&g_u, &tape.u[step]);
            let dec_in = if step == 0 { &tape.b[depth - 1] } else { &tape.c[step - 1] };
            let (g_prev, grads_dec) = dec.backward(dec_in, &g_u);
            if level >= 1 {
                accumulate(&mut skip_g[level - 1], g_partner);
            } else {
                accumulate(&mut gx0, g_partner);
            }
            if step == 0 {
                accumulate(&mut skip_g[depth - 1], g_prev);
            } else {
                g_cur = g_prev;
            }
            up_grads[step] = Some((grads_dec, grads_conv));
        }
        let mut down_grads: Vec<Option<(LayerGrads, LayerGrads)>> =
            (0..depth).map(|_| None).collect();
        for level in (0..depth).rev() {
            let g_b = skip_g[level].take().expect("skip gradient missing");
            let g_b = relu_backward(&g_b, &tape.b[level]);
            let (g_a, grads_s1) = self.down[level].1.backward(&tape.a[level], &g_b);
            let g_a = relu_backward(&g_a, &tape.a[level]);
            let input = if level == 0 { &tape.x0 } else { &tape.b[level - 1] };
            let (g_in, grads_s2) = self.down[level].0.backward(input, &g_a);
            if level >= 1 {
                accumulate(&mut skip_g[level - 1], g_in);
            } else {
                accumulate(&mut gx0, g_in);
            }
            down_grads[level] = Some((grads_s2, grads_s1));
        }
        let grads = UNetGrads {
            down: down_grads.into_iter().map(|g| g.unwrap()).collect(),
            up: up_grads.into_iter().map(|g| g.unwrap()).collect(),
            output: grads_output,
        };
        (gx0.expect("input gradient missing"), grads)
    }

    /// Parameter tensors in canonical order (down levels, up steps, output;
    /// weights before bias). Gradient and checkpoint code relies on this
    /// order matching [`UNetGrads::tensors`].
    pub fn param_tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for (s2, s1) in &mut self.down {
            out.extend([&mut s2.weights, &mut s2.bias, &mut s1.weights, &mut s1.bias]);
        }
        for (dec, conv) in &mut self.up {
            out.extend([&mut dec.weights, &mut dec.bias, &mut conv.weights, &mut conv.bias]);
        }
        out.extend([&mut self.output.weights, &mut self.output.bias]);
        out
    }

    pub fn param_tensors(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for (s2, s1) in &self.down {
            out.extend([&s2.weights, &s2.bias, &s1.weights, &s1.bias]);
        }
        for (dec, conv) in &self.up {
            out.extend([&dec.weights, &dec.bias, &conv.weights, &conv.bias]);
        }
        out.extend([&self.output.weights, &self.output.bias]);
        out
    }
}

impl UNetGrads {
    /// Same canonical order as [`UNet::param_tensors_mut`].
    pub fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for (s2, s1) in &self.down {
            out.extend([&s2.weights, &s2.bias, &s1.weights, &s1.bias]);
        }
        for (dec, conv) in &self.up {
            out.extend([&dec.weights, &dec.bias, &conv.weights, &conv.bias]);
        }
        out.extend([&self.output.weights, &self.output.bias]);
        out
    }

    pub fn add(&mut self, other: &UNetGrads) {
        let add_layer = |d: &mut LayerGrads, s: &LayerGrads| {
            for (a, b) in d.weights.iter_mut().zip(&s.weights) {
                *a += b;
            }
            for (a, b) in d.bias.iter_mut().zip(&s.bias) {
                *a += b;
            }
        };
        for (d, s) in self.down.iter_mut().zip(&other.down) {
            add_layer(&mut d.0, &s.0);
            add_layer(&mut d.1, &s.1);
        }
        for (d, s) in self.up.iter_mut().zip(&other.up) {
            add_layer(&mut d.0, &s.0);
            add_layer(&mut d.1, &s.1);
        }
        add_layer(&mut self.output, &other.output);
    }

    pub fn scale(&mut self, factor: f64) {
        let scale_layer = |d: &mut LayerGrads| {
            for a in d.weights.iter_mut().chain(d.bias.iter_mut()) {
                *a *= factor;
            }
        };
        for d in self.down.iter_mut() {
            scale_layer(&mut d.0);
            scale_layer(&mut d.1);
        }
        for d in self.up.iter_mut() {
            scale_layer(&mut d.0);
            scale_layer(&mut d.1);
        }
        scale_layer(&mut self.output);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{central_diff, max_rel_err};
    use crate::nn::tensor::dot;
    use crate::rng::stream;
    use rand::Rng;

    fn rand_tensor(c: usize, h: usize, w: usize, seed: u64) -> Tensor {
        let mut r = stream(seed, 96, 0);
        Tensor::from_vec(c, h, w, 1, (0..c * h * w).map(|_| r.gen_range(-1.0..1.0)).collect())
    }

    fn rand_unet(in_c: usize, channels: usize, depth: usize, seed: u64) -> UNet {
        let mut net = UNet::new(in_c, channels, depth, 3);
        let mut r = stream(seed, 96, 1);
        for t in net.param_tensors_mut() {
            for v in t.iter_mut() {
                *v = r.gen_range(-0.5..0.5);
            }
        }
        net
    }

    #[test]
    fn output_shape_is_single_channel_input_size() {
        for (h, w) in [(8, 8), (7, 5), (9, 6), (4, 4)] {
            let net = rand_unet(3, 4, 2, 1);
            let x = rand_tensor(3, h, w, 2);
            let (y, _) = net.forward(&x);
            assert_eq!((y.c, y.h, y.w, y.lanes), (1, h, w, 1), "at {h}×{w}");
        }
    }

    #[test]
    fn zero_weights_yield_constant_output_bias() {
        let mut net = UNet::new(2, 3, 2, 3);
        net.output.bias = vec![0.125];
        let x = rand_tensor(2, 6, 6, 3);
        let (y, _) = net.forward(&x);
        for v in &y.data {
            assert_eq!(*v, 0.125);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let net = rand_unet(2, 3, 2, 4);
        let x = rand_tensor(2, 7, 6, 5);
        let (y1, _) = net.forward(&x);
        let (y2, _) = net.forward(&x);
        for (a, b) in y1.data.iter().zip(&y2.data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn gradients_match_finite_differences_everywhere() {
        let net = rand_unet(2, 2, 2, 6);
        let x = rand_tensor(2, 6, 5, 7);
        let proj = rand_tensor(1, 6, 5, 8);
        let (_, tape) = net.forward(&x);
        let (gx, grads) = net.backward(&tape, &proj);

        // input gradient
        let mut xv = x.data.clone();
        let loss_x = |v: &[f64]| {
            let xt = Tensor::from_vec(2, 6, 5, 1, v.to_vec());
            dot(&net.forward(&xt).0.data, &proj.data)
        };
        let num = central_diff(&mut xv, loss_x, 1e-5);
        assert!(max_rel_err(&gx.data, &num) < 1e-4, "input grad");

        // every parameter tensor
        let analytic = grads.tensors();
        let n_tensors = analytic.len();
        for ti in 0..n_tensors {
            let mut pv = net.param_tensors()[ti].clone();
            let loss_p = |v: &[f64]| {
                let mut m = net.clone();
                *m.param_tensors_mut()[ti] = v.to_vec();
                dot(&m.forward(&x).0.data, &proj.data)
            };
            let num_p = central_diff(&mut pv, loss_p, 1e-5);
            let err = max_rel_err(analytic[ti], &num_p);
            assert!(err < 1e-4, "param tensor {ti}: rel err {err}");
        }
    }

    #[test]
    fn grads_accumulate_and_scale() {
        let net = rand_unet(2, 2, 1, 9);
        let x = rand_tensor(2, 5, 5, 10);
        let proj = rand_tensor(1, 5, 5, 11);
        let (_, tape) = net.forward(&x);
        let (_, g1) = net.backward(&tape, &proj);
        let mut g2 = g1.clone();
        g2.add(&g1);
        g2.scale(0.5);
        for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
            for (x1, x2) in a.iter().zip(b.iter()) {
                assert!((x1 - x2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn param_order_matches_between_net_and_grads() {
        let mut net = rand_unet(3, 4, 2, 12);
        let x = rand_tensor(3, 6, 6, 13);
        let proj = rand_tensor(1, 6, 6, 14);
        let (_, tape) = net.forward(&x);
        let (_, grads) = net.backward(&tape, &proj);
        let shapes_p: Vec<usize> = net.param_tensors_mut().iter().map(|t| t.len()).collect();
        let shapes_g: Vec<usize> = grads.tensors().iter().map(|t| t.len()).collect();
        assert_eq!(shapes_p, shapes_g);
    }
}
