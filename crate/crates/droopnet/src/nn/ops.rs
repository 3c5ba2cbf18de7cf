//! Pointwise ops, channel concatenation, L1 loss, and the per-tile lane
//! aggregation that turns a stack of per-map network outputs into the three
//! summary maps (max, mean-of-extremes, μ+3σ).

use super::tensor::Tensor;

/// Elementwise `max(0, x)`.
pub fn relu(x: &Tensor) -> Tensor {
    let data = x.data.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
    Tensor { c: x.c, h: x.h, w: x.w, lanes: x.lanes, data }
}

/// ReLU gradient; masks by the saved *output* (y > 0 ⇔ x > 0, and the
/// subgradient at exactly 0 is taken as 0).
pub fn relu_backward(gout: &Tensor, out: &Tensor) -> Tensor {
    assert_eq!(gout.data.len(), out.data.len());
    let data = gout
        .data
        .iter()
        .zip(&out.data)
        .map(|(&g, &y)| if y > 0.0 { g } else { 0.0 })
        .collect();
    Tensor { c: gout.c, h: gout.h, w: gout.w, lanes: gout.lanes, data }
}

/// Stack `b`'s channels after `a`'s.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!((a.h, a.w, a.lanes), (b.h, b.w, b.lanes), "spatial/lane mismatch");
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Tensor { c: a.c + b.c, h: a.h, w: a.w, lanes: a.lanes, data }
}

/// Inverse of [`concat_channels`] for gradients: split after `c_a` channels.
pub fn split_channels(g: &Tensor, c_a: usize) -> (Tensor, Tensor) {
    assert!(c_a <= g.c);
    let n = g.h * g.w * g.lanes;
    let (da, db) = g.data.split_at(c_a * n);
    (
        Tensor { c: c_a, h: g.h, w: g.w, lanes: g.lanes, data: da.to_vec() },
        Tensor { c: g.c - c_a, h: g.h, w: g.w, lanes: g.lanes, data: db.to_vec() },
    )
}

/// L1 loss `Σ |pred − target|` and its gradient w.r.t. `pred`
/// (`sign(pred − target)`, with `sign(0) = 0`).
pub fn l1_loss(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(pred.len(), target.len(), "length mismatch");
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target) {
        let d = p - t;
        loss += d.abs();
        grad.push(if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        });
    }
    (loss, grad)
}

/// Per-cell aggregates over the lane dimension.
#[derive(Debug, Clone)]
pub struct LaneAggregates {
    /// max over lanes
    pub max: Tensor,
    /// (max + min) / 2
    pub mean_extremes: Tensor,
    /// μ + 3σ (population σ)
    pub msd: Tensor,
    /// Min is kept verbatim for the backward pass: reconstructing it as
    /// `2·mean_extremes − max` re-rounds and can miss the stored lane value.
    min: Vec<f64>,
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

/// Reduce `(c, h, w, L)` to three `(c, h, w, 1)` maps per cell.
///
/// Sums run over lane values sorted ascending (ties by value bits), so the
/// results are bitwise invariant under any permutation of the lanes.
pub fn lane_aggregate(f: &Tensor) -> LaneAggregates {
    assert!(f.lanes >= 1, "empty lane sequence");
    let l = f.lanes;
    let cells = f.c * f.h * f.w;
    let mut max = Vec::with_capacity(cells);
    let mut mean = Vec::with_capacity(cells);
    let mut msd = Vec::with_capacity(cells);
    let mut min_v = Vec::with_capacity(cells);
    let mut mu_v = Vec::with_capacity(cells);
    let mut sg_v = Vec::with_capacity(cells);
    let mut buf = vec![0.0f64; l];
    for cell in 0..cells {
        buf.copy_from_slice(&f.data[cell * l..(cell + 1) * l]);
        buf.sort_unstable_by(f64::total_cmp);
        let (lo, hi) = (buf[0], buf[l - 1]);
        let mu = crate::nn::tensor::sum(&buf) / l as f64;
        let mut var_sum = [0.0f64; 8];
        for (j, v) in buf.iter().enumerate() {
            let d = v - mu;
            var_sum[j % 8] += d * d;
        }
        let sigma = (var_sum.iter().sum::<f64>() / l as f64).sqrt();
        max.push(hi);
        mean.push(0.5 * (hi + lo));
        msd.push(mu + 3.0 * sigma);
        min_v.push(lo);
        mu_v.push(mu);
        sg_v.push(sigma);
    }
    let shape = |data| Tensor { c: f.c, h: f.h, w: f.w, lanes: 1, data };
    LaneAggregates {
        max: shape(max),
        mean_extremes: shape(mean),
        msd: shape(msd),
        min: min_v,
        mu: mu_v,
        sigma: sg_v,
    }
}

/// Gradient of [`lane_aggregate`] w.r.t. `f` given upstream gradients of the
/// three maps. Max/min route to the first extremal lane in original order;
/// the σ term contributes nothing where σ = 0.
pub fn lane_aggregate_backward(
    f: &Tensor,
    agg: &LaneAggregates,
    g_max: &Tensor,
    g_mean: &Tensor,
    g_msd: &Tensor,
) -> Tensor {
    let l = f.lanes;
    let cells = f.c * f.h * f.w;
    assert_eq!(g_max.data.len(), cells);
    assert_eq!(g_mean.data.len(), cells);
    assert_eq!(g_msd.data.len(), cells);
    let mut gf = Tensor::zeros(f.c, f.h, f.w, l);
    for cell in 0..cells {
        let vals = &f.data[cell * l..(cell + 1) * l];
        let gm = g_max.data[cell];
        let ge = g_mean.data[cell];
        let gs = g_msd.data[cell];
        let out = &mut gf.data[cell * l..(cell + 1) * l];
        let maxv = agg.max.data[cell];
        let minv = agg.min[cell];
        if gm != 0.0 || ge != 0.0 {
            let j_max = vals.iter().position(|&v| v == maxv).expect("max lane present");
            out[j_max] += gm + 0.5 * ge;
            let j_min = vals.iter().position(|&v| v == minv).expect("min lane present");
            out[j_min] += 0.5 * ge;
        }
        if gs != 0.0 {
            let mu = agg.mu[cell];
            let sigma = agg.sigma[cell];
            let inv_l = 1.0 / l as f64;
            if sigma > 0.0 {
                let k = 3.0 * inv_l / sigma;
                for (j, &v) in vals.iter().enumerate() {
                    out[j] += gs * (inv_l + k * (v - mu));
                }
            } else {
                for slot in out.iter_mut() {
                    *slot += gs * inv_l;
                }
            }
        }
    }
    gf
}
