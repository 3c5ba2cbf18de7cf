//! Transposed 2-D convolution (stride 2, zero padding) and its gradients.
//!
//! The forward pass is the exact linear adjoint of a stride-2 zero-padded
//! convolution with the same weight array: each input pixel scatters a
//! weighted kernel patch into the output. Because `ceil`-mode downsampling
//! can map both `2h−1` and `2h` to `h`, the caller names the target size and
//! the layer drops scatter contributions that fall outside it.

use super::conv::LayerGrads;
use super::tensor::{axpy, dot, sum, Tensor};

/// Transposed convolution layer: weights `(in_c, out_c, k, k)`, bias `(out_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeconvLayer {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DeconvLayer {
    pub fn new(in_c: usize, out_c: usize, k: usize) -> Self {
        assert!(k % 2 == 1, "kernel size must be odd");
        assert!(in_c >= 1 && out_c >= 1);
        DeconvLayer {
            in_c,
            out_c,
            k,
            stride: 2,
            weights: vec![0.0; in_c * out_c * k * k],
            bias: vec![0.0; out_c],
        }
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Valid target sizes for an input of spatial size `s`: `2s−1` or `2s`
    /// (the two sizes that ceil-divide back to `s`).
    pub fn valid_target(h_in: usize, h_out: usize) -> bool {
        h_out == 2 * h_in || h_out + 1 == 2 * h_in
    }

    #[inline]
    fn wgt(&self, ic: usize, oc: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((ic * self.out_c + oc) * self.k + ky) * self.k + kx]
    }

    fn check_target(&self, x: &Tensor, out_h: usize, out_w: usize) {
        assert_eq!(x.c, self.in_c, "channel mismatch");
        assert!(
            Self::valid_target(x.h, out_h) && Self::valid_target(x.w, out_w),
            "target {out_h}×{out_w} unreachable from {}×{} with stride 2",
            x.h,
            x.w
        );
    }

    pub fn forward(&self, x: &Tensor, out_h: usize, out_w: usize) -> Tensor {
        self.check_target(x, out_h, out_w);
        x.debug_check_finite("deconv input");
        let l = x.lanes;
        let p = self.k / 2;
        // scatter into a border-padded buffer, then crop: cells landing in the
        // border are exactly the contributions zero padding discards
        let mut op = Tensor::zeros(self.out_c, out_h + 2 * p, out_w + 2 * p, l);
        for ic in 0..self.in_c {
            for oc in 0..self.out_c {
                for ky in 0..self.k {
                    for kx in 0..self.k {
                        let wgt = self.wgt(ic, oc, ky, kx);
                        // max target index is 2(s−1)+k−1 = 2s, and the padded
                        // buffer extends to at least 2s+1, so every scatter
                        // lands in range for both admissible target sizes.
                        for y in 0..x.h {
                            let so = x.row_off(ic, y);
                            let oo = op.row_off(oc, y * self.stride + ky);
                            for xi in 0..x.w {
                                let di = oo + (xi * self.stride + kx) * l;
                                axpy(
                                    &mut op.data[di..di + l],
                                    wgt,
                                    &x.data[so + xi * l..so + (xi + 1) * l],
                                );
                            }
                        }
                    }
                }
            }
        }
        let mut out = Tensor::zeros(self.out_c, out_h, out_w, l);
        for oc in 0..self.out_c {
            let n = out_h * out_w * l;
            out.data[oc * n..(oc + 1) * n].fill(self.bias[oc]);
            for y in 0..out_h {
                let so = op.row_off(oc, y + p) + p * l;
                let doff = out.row_off(oc, y);
                axpy(&mut out.data[doff..doff + out_w * l], 1.0, &op.data[so..so + out_w * l]);
            }
        }
        out.debug_check_finite("deconv output");
        out
    }

    /// Reverse-mode gradients: returns (d loss/d input, parameter grads).
    pub fn backward(&self, x: &Tensor, gout: &Tensor) -> (Tensor, LayerGrads) {
        self.check_target(x, gout.h, gout.w);
        assert_eq!(gout.c, self.out_c, "channel mismatch");
        assert_eq!(gout.lanes, x.lanes, "lane mismatch");
        let l = x.lanes;
        let p = self.k / 2;
        let gb: Vec<f64> = (0..self.out_c).map(|oc| sum(gout.plane(oc))).collect();
        // zero-pad the output gradient so the gather below never bounds-checks
        let mut gp = Tensor::zeros(self.out_c, gout.h + 2 * p, gout.w + 2 * p, l);
        for oc in 0..self.out_c {
            for y in 0..gout.h {
                let so = gout.row_off(oc, y);
                let doff = gp.row_off(oc, y + p) + p * l;
                gp.data[doff..doff + gout.w * l].copy_from_slice(&gout.data[so..so + gout.w * l]);
            }
        }
        let mut gin = Tensor::zeros(self.in_c, x.h, x.w, l);
        let mut gw = vec![0.0; self.weights.len()];
        for ic in 0..self.in_c {
            for oc in 0..self.out_c {
                for ky in 0..self.k {
                    for kx in 0..self.k {
                        let wgt = self.wgt(ic, oc, ky, kx);
                        let mut acc = 0.0;
                        for y in 0..x.h {
                            let xo = x.row_off(ic, y);
                            let go = gp.row_off(oc, y * self.stride + ky);
                            let io = gin.row_off(ic, y);
                            for xi in 0..x.w {
                                let gslice =
                                    &gp.data[go + (xi * self.stride + kx) * l
                                        ..go + (xi * self.stride + kx) * l + l];
                                acc += dot(&x.data[xo + xi * l..xo + (xi + 1) * l], gslice);
                                axpy(&mut gin.data[io + xi * l..io + (xi + 1) * l], wgt, gslice);
                            }
                        }
                        gw[((ic * self.out_c + oc) * self.k + ky) * self.k + kx] = acc;
                    }
                }
            }
        }
        (gin, LayerGrads { weights: gw, bias: gb })
    }
}
