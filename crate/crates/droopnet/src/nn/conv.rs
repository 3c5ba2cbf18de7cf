//! 2-D convolution (cross-correlation) with stride 1 or 2 and two padding
//! modes, plus its reverse-mode gradients.
//!
//! Padding keeps the "same" arithmetic for odd kernels: stride 1 preserves
//! spatial size, stride 2 yields `ceil(size/2)`. Replication padding repeats
//! the border pixel; its backward pass folds border gradients back into the
//! edge pixels they replicated.

use super::tensor::{axpy, dot, sum, Tensor};

/// Input padding mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pad {
    /// Repeat the nearest border pixel.
    Replicate,
    /// Pad with zeros.
    Zero,
}

/// Convolution layer: weights `(out_c, in_c, k, k)`, bias `(out_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: Pad,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients of one conv/deconv layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn new(in_c: usize, out_c: usize, k: usize, stride: usize, pad: Pad) -> Self {
        assert!(k % 2 == 1, "kernel size must be odd");
        assert!(stride == 1 || stride == 2, "stride must be 1 or 2");
        assert!(in_c >= 1 && out_c >= 1);
        ConvLayer {
            in_c,
            out_c,
            k,
            stride,
            pad,
            weights: vec![0.0; out_c * in_c * k * k],
            bias: vec![0.0; out_c],
        }
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Output spatial size: stride 1 → unchanged, stride 2 → ceil(half).
    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let p = self.k / 2;
        assert!(h + 2 * p >= self.k && w + 2 * p >= self.k, "input smaller than kernel");
        ((h + 2 * p - self.k) / self.stride + 1, (w + 2 * p - self.k) / self.stride + 1)
    }

    #[inline]
    fn wgt(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((oc * self.in_c + ic) * self.k + ky) * self.k + kx]
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        assert_eq!(x.c, self.in_c, "channel mismatch");
        x.debug_check_finite("conv input");
        let l = x.lanes;
        let (oh, ow) = self.out_hw(x.h, x.w);
        let xp = pad_input(x, self.k / 2, self.pad);
        let mut out = Tensor::zeros(self.out_c, oh, ow, l);
        for oc in 0..self.out_c {
            let n = oh * ow * l;
            out.data[oc * n..(oc + 1) * n].fill(self.bias[oc]);
        }
        let row = ow * l;
        for oc in 0..self.out_c {
            for ic in 0..self.in_c {
                for ky in 0..self.k {
                    for kx in 0..self.k {
                        let wgt = self.wgt(oc, ic, ky, kx);
                        for y in 0..oh {
                            let so = xp.row_off(ic, y * self.stride + ky);
                            let oo = out.row_off(oc, y);
                            if self.stride == 1 {
                                axpy(
                                    &mut out.data[oo..oo + row],
                                    wgt,
                                    &xp.data[so + kx * l..so + kx * l + row],
                                );
                            } else {
                                for xo in 0..ow {
                                    let si = so + (xo * self.stride + kx) * l;
                                    let di = oo + xo * l;
                                    axpy(&mut out.data[di..di + l], wgt, &xp.data[si..si + l]);
                                }
                            }
                        }
                    }
                }
            }
        }
        out.debug_check_finite("conv output");
        out
    }

    /// Reverse-mode gradients: returns (d loss/d input, parameter grads).
    pub fn backward(&self, x: &Tensor, gout: &Tensor) -> (Tensor, LayerGrads) {
        assert_eq!(x.c, self.in_c, "channel mismatch");
        let l = x.lanes;
        let (oh, ow) = self.out_hw(x.h, x.w);
        assert_eq!((gout.c, gout.h, gout.w, gout.lanes), (self.out_c, oh, ow, l));
        let p = self.k / 2;
        let xp = pad_input(x, p, self.pad);
        let mut gxp = Tensor::zeros(self.in_c, xp.h, xp.w, l);
        let mut gw = vec![0.0; self.weights.len()];
        let gb: Vec<f64> = (0..self.out_c).map(|oc| sum(gout.plane(oc))).collect();
        let row = ow * l;
        for oc in 0..self.out_c {
            for ic in 0..self.in_c {
                for ky in 0..self.k {
                    for kx in 0..self.k {
                        let wgt = self.wgt(oc, ic, ky, kx);
                        let mut acc = 0.0;
                        for y in 0..oh {
                            let so = xp.row_off(ic, y * self.stride + ky);
                            let oo = gout.row_off(oc, y);
                            let grow = &gout.data[oo..oo + row];
                            if self.stride == 1 {
                                acc += dot(grow, &xp.data[so + kx * l..so + kx * l + row]);
                                axpy(&mut gxp.data[so + kx * l..so + kx * l + row], wgt, grow);
                            } else {
                                for xo in 0..ow {
                                    let si = so + (xo * self.stride + kx) * l;
                                    acc += dot(&grow[xo * l..(xo + 1) * l], &xp.data[si..si + l]);
                                    axpy(
                                        &mut gxp.data[si..si + l],
                                        wgt,
                                        &grow[xo * l..(xo + 1) * l],
                                    );
                                }
                            }
                        }
                        gw[((oc * self.in_c + ic) * self.k + ky) * self.k + kx] = acc;
                    }
                }
            }
        }
        let gin = unpad_fold(&gxp, p, self.pad, x.h, x.w);
        (gin, LayerGrads { weights: gw, bias: gb })
    }
}

/// Materialize the padded input: `(c, h+2p, w+2p, lanes)`.
fn pad_input(x: &Tensor, p: usize, pad: Pad) -> Tensor {
    if p == 0 {
        return x.clone();
    }
    let l = x.lanes;
    let (ph, pw) = (x.h + 2 * p, x.w + 2 * p);
    let mut out = Tensor::zeros(x.c, ph, pw, l);
    for ch in 0..x.c {
        for py in 0..ph {
            let sy = match pad {
                Pad::Zero => {
                    if py < p || py >= p + x.h {
                        continue;
                    }
                    py - p
                }
                Pad::Replicate => py.saturating_sub(p).min(x.h - 1),
            };
            let so = x.row_off(ch, sy);
            let src = &x.data[so..so + x.w * l];
            let doff = out.row_off(ch, py);
            let dst = &mut out.data[doff..doff + pw * l];
            dst[p * l..(p + x.w) * l].copy_from_slice(src);
            if pad == Pad::Replicate {
                for b in 0..p {
                    // left border repeats pixel x=0, right border pixel x=w−1
                    dst.copy_within(p * l..(p + 1) * l, b * l);
                    dst.copy_within((p + x.w - 1) * l..(p + x.w) * l, (p + x.w + b) * l);
                }
            }
        }
    }
    out
}

/// Collapse a padded-shape gradient back to input shape.
///
/// Zero padding discards border gradients; replication padding adds each
/// border cell's gradient into the edge pixel it replicated.
fn unpad_fold(gxp: &Tensor, p: usize, pad: Pad, h: usize, w: usize) -> Tensor {
    if p == 0 {
        return gxp.clone();
    }
    let l = gxp.lanes;
    let mut gin = Tensor::zeros(gxp.c, h, w, l);
    for ch in 0..gxp.c {
        for py in 0..gxp.h {
            let ty = match pad {
                Pad::Zero => {
                    if py < p || py >= p + h {
                        continue;
                    }
                    py - p
                }
                Pad::Replicate => py.saturating_sub(p).min(h - 1),
            };
            let so = gxp.row_off(ch, py);
            let doff = gin.row_off(ch, ty);
            axpy(&mut gin.data[doff..doff + w * l], 1.0, &gxp.data[so + p * l..so + (p + w) * l]);
            if pad == Pad::Replicate {
                // borders fold into x=0 and x=w−1
                for b in 0..p {
                    for lane in 0..l {
                        gin.data[doff + lane] += gxp.data[so + b * l + lane];
                        gin.data[doff + (w - 1) * l + lane] +=
                            gxp.data[so + (p + w + b) * l + lane];
                    }
                }
            }
        }
    }
    gin
}
