//! Accuracy, hotspot, and runtime evaluation of trained predictors.
//!
//! All error statistics pool tiles across every prediction/truth pair rather
//! than averaging per-map summaries, so a handful of bad tiles in one map
//! cannot hide behind many easy maps. Timing comparisons run both sides
//! single-threaded and report the median of three passes.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::compress::temporal_compress;
use crate::error::{io_err, Error, Result};
use crate::grid::PdnGrid;
use crate::model::Model;
use crate::nn::Tensor;
use crate::sim::{simulate_noise_map, CurrentTrace, NoiseMap};
use crate::svg;
use crate::system::TransientSystem;
use crate::tiling::{tile_current_maps, TileCurrentMaps, Tiling};

/// Truth floor below which a tile is excluded from relative-error statistics.
///
/// Dividing by a truth of a few microvolts turns rounding dust into huge
/// ratios that say nothing about the predictor, so guarded RE skips tiles
/// whose true worst-case noise is under 1 mV. The unguarded maximum is still
/// reported alongside so the exclusion cannot hide anything.
pub const RE_GUARD_V: f64 = 1e-3;

/// Pooled absolute- and relative-error statistics over a set of maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyStats {
    pub mean_ae_v: f64,
    pub p99_ae_v: f64,
    pub max_ae_v: f64,
    pub mean_re: f64,
    pub p99_re: f64,
    pub max_re: f64,
    /// Maximum |err|/truth over every tile with nonzero truth, ignoring the
    /// guard; large values here flag tiles with tiny true noise.
    pub max_re_unguarded: f64,
    /// The guard that was applied (volts).
    pub re_guard_v: f64,
    /// Tiles left out of the guarded RE pool.
    pub re_excluded_tiles: usize,
}

/// Nearest-rank percentile: the smallest element with at least `p·n` values
/// at or below it. `sorted` must be ascending and non-empty.
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.max(1) - 1]
}

/// Per-tile absolute and relative error statistics pooled over all pairs.
///
/// AE is |truth − pred| in volts. RE divides AE by the truth, skipping tiles
/// under [`RE_GUARD_V`]; percentiles are nearest-rank. Fails if the pairing
/// is ragged, any pair's shape differs, or no tile survives the RE guard.
pub fn accuracy_metrics(preds: &[NoiseMap], truths: &[NoiseMap]) -> Result<AccuracyStats> {
    if preds.len() != truths.len() || preds.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions paired with {} truth maps",
            preds.len(),
            truths.len()
        )));
    }
    let mut aes = Vec::new();
    let mut res = Vec::new();
    let mut max_re_unguarded = 0.0f64;
    let mut excluded = 0usize;
    for (p, t) in preds.iter().zip(truths) {
        if p.m != t.m || p.n != t.n {
            return Err(Error::ShapeMismatch(format!(
                "prediction is {}×{} tiles, truth is {}×{}",
                p.m, p.n, t.m, t.n
            )));
        }
        for (&pv, &tv) in p.values_v.iter().zip(&t.values_v) {
            let ae = (tv - pv).abs();
            aes.push(ae);
            if tv > 0.0 {
                max_re_unguarded = max_re_unguarded.max(ae / tv);
            }
            if tv >= RE_GUARD_V {
                res.push(ae / tv);
            } else {
                excluded += 1;
            }
        }
    }
    if res.is_empty() {
        return Err(Error::Invalid(format!(
            "every truth tile is below the {RE_GUARD_V} V relative-error guard"
        )));
    }
    aes.sort_unstable_by(f64::total_cmp);
    res.sort_unstable_by(f64::total_cmp);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(AccuracyStats {
        mean_ae_v: mean(&aes),
        p99_ae_v: nearest_rank(&aes, 0.99),
        max_ae_v: *aes.last().unwrap(),
        mean_re: mean(&res),
        p99_re: nearest_rank(&res, 0.99),
        max_re: *res.last().unwrap(),
        max_re_unguarded,
        re_guard_v: RE_GUARD_V,
        re_excluded_tiles: excluded,
    })
}

/// Hotspot classification quality at a noise budget `v_spec`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotspotStats {
    /// Noise budget (volts); a tile is a hotspot when its worst-case noise
    /// meets or exceeds it, on either the truth or the prediction side.
    pub v_spec_v: f64,
    pub true_positives: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    /// Fraction of true hotspots the prediction missed, FN/(TP+FN);
    /// `None` when the truth contains no hotspot at all.
    pub missing_rate: Option<f64>,
    /// Rank-based (Mann–Whitney) area under the ROC curve, with predicted
    /// noise as the score and the truth label as the class; tied scores get
    /// averaged ranks. `None` when either class is empty.
    pub auc: Option<f64>,
}

/// Classify every tile of every pair against `v_spec_v` and summarize.
pub fn hotspot_metrics(
    preds: &[NoiseMap],
    truths: &[NoiseMap],
    v_spec_v: f64,
) -> Result<HotspotStats> {
    if preds.len() != truths.len() || preds.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions paired with {} truth maps",
            preds.len(),
            truths.len()
        )));
    }
    if !(v_spec_v > 0.0) {
        return Err(Error::Invalid(format!("noise budget {v_spec_v} V must be positive")));
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    let (mut tp, mut fn_, mut fp, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (p, t) in preds.iter().zip(truths) {
        if p.m != t.m || p.n != t.n {
            return Err(Error::ShapeMismatch(format!(
                "prediction is {}×{} tiles, truth is {}×{}",
                p.m, p.n, t.m, t.n
            )));
        }
        for (&pv, &tv) in p.values_v.iter().zip(&t.values_v) {
            let hot = tv >= v_spec_v;
            let flagged = pv >= v_spec_v;
            match (hot, flagged) {
                (true, true) => tp += 1,
                (true, false) => fn_ += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
            }
            scores.push(pv);
            labels.push(hot);
        }
    }
    let missing_rate = if tp + fn_ > 0 {
        Some(fn_ as f64 / (tp + fn_) as f64)
    } else {
        None
    };
    Ok(HotspotStats {
        v_spec_v,
        true_positives: tp,
        false_negatives: fn_,
        false_positives: fp,
        true_negatives: tn,
        missing_rate,
        auc: rank_auc(&scores, &labels),
    })
}

/// Mann–Whitney AUC with tie-averaged ranks; `None` if a class is empty.
fn rank_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j share the average rank of the tie group.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            if labels[k] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Wall-clock comparison between the simulator and the predictor.
///
/// Wall clocks vary run to run, so reproducibility checks must treat this
/// block like the run manifest: environment data, not part of the
/// byte-stable surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Median-of-3 seconds per vector for simulate + reduce-to-map.
    pub oracle_secs_per_vector: f64,
    /// Median-of-3 seconds per vector for featurize + compress + forward.
    pub predict_secs_per_vector: f64,
    /// oracle / predictor.
    pub speedup: f64,
    /// Thread count both sides ran with (1 keeps the comparison honest).
    pub threads: usize,
}

fn median3(mut v: [f64; 3]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    v[1]
}

/// Time the simulator against the predictor on the same vectors.
///
/// Both sides exclude one-time setup — the system factorization on the
/// simulator side, distance-feature normalization on the predictor side —
/// because each is paid once per design, not per vector. Three passes each,
/// median taken, everything on the current thread.
pub fn benchmark(
    model: &Model,
    dist_norm: &Tensor,
    sys: &TransientSystem,
    grid: &PdnGrid,
    tiling: &Tiling,
    traces: &[CurrentTrace],
    rate: f64,
    dr: f64,
) -> Result<Timing> {
    if traces.is_empty() {
        return Err(Error::Invalid("benchmark needs at least one vector".into()));
    }
    let mut oracle_secs = [0.0f64; 3];
    let mut predict_secs = [0.0f64; 3];
    for pass in 0..3 {
        let start = Instant::now();
        for trace in traces {
            let map = simulate_noise_map(sys, grid, trace, tiling)?;
            std::hint::black_box(&map);
        }
        oracle_secs[pass] = start.elapsed().as_secs_f64();

        let start = Instant::now();
        for trace in traces {
            let maps = tile_current_maps(trace, tiling)?;
            let kept = temporal_compress(&maps, rate, dr)?;
            let pred = model.predict(dist_norm, &kept.maps)?;
            std::hint::black_box(&pred);
        }
        predict_secs[pass] = start.elapsed().as_secs_f64();
    }
    let n = traces.len() as f64;
    let oracle = median3(oracle_secs) / n;
    let predict = median3(predict_secs) / n;
    Ok(Timing {
        oracle_secs_per_vector: oracle,
        predict_secs_per_vector: predict,
        speedup: oracle / predict,
        threads: 1,
    })
}

/// One compression rate's accuracy and cost in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rate: f64,
    pub mean_re: f64,
    pub mean_ae_v: f64,
    /// Median-of-3 seconds per vector for compress + forward at this rate.
    pub predict_secs_per_vector: f64,
}

/// Evaluate one trained model across compression rates.
///
/// The model stays fixed; only the inference-side compression rate varies.
/// `maps` are the uncompressed per-vector tile maps paired with `truths`.
pub fn sweep_compression(
    model: &Model,
    dist_norm: &Tensor,
    maps: &[TileCurrentMaps],
    truths: &[NoiseMap],
    rates: &[f64],
    dr: f64,
) -> Result<Vec<SweepRow>> {
    if maps.len() != truths.len() || maps.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} map sequences paired with {} truth maps",
            maps.len(),
            truths.len()
        )));
    }
    if rates.is_empty() {
        return Err(Error::Invalid("sweep needs at least one compression rate".into()));
    }
    let mut rows = Vec::with_capacity(rates.len());
    for &rate in rates {
        let mut preds = Vec::with_capacity(maps.len());
        let mut secs = [0.0f64; 3];
        for pass in 0..3 {
            let start = Instant::now();
            let mut out = Vec::with_capacity(maps.len());
            for m in maps {
                let kept = temporal_compress(m, rate, dr)?;
                out.push(model.predict(dist_norm, &kept.maps)?);
            }
            secs[pass] = start.elapsed().as_secs_f64();
            preds = out;
        }
        let acc = accuracy_metrics(&preds, truths)?;
        rows.push(SweepRow {
            rate,
            mean_re: acc.mean_re,
            mean_ae_v: acc.mean_ae_v,
            predict_secs_per_vector: median3(secs) / maps.len() as f64,
        });
    }
    Ok(rows)
}

/// Write a sweep as CSV, one row per rate.
pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut s = String::from("rate,mean_re,mean_ae_v,predict_secs_per_vector\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.rate, r.mean_re, r.mean_ae_v, r.predict_secs_per_vector
        ));
    }
    std::fs::write(path, s).map_err(|e| io_err(path, e))
}

/// Render the sweep as two SVG line plots: error vs rate and cost vs rate.
pub fn sweep_plots(rows: &[SweepRow]) -> (String, String) {
    let re_pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.rate, r.mean_re)).collect();
    let rt_pts: Vec<(f64, f64)> =
        rows.iter().map(|r| (r.rate, r.predict_secs_per_vector)).collect();
    let re_svg = svg::line_plot(
        &[("mean RE", re_pts)],
        "Relative error vs compression rate",
        "compression rate",
        "mean relative error",
    );
    let rt_svg = svg::line_plot(
        &[("seconds/vector", rt_pts)],
        "Inference cost vs compression rate",
        "compression rate",
        "seconds per vector",
    );
    (re_svg, rt_svg)
}

/// Everything the evaluate step reports about one model on one test set.
///
/// `timing` is `None` when no benchmark ran; when present it is the only
/// non-deterministic part of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: AccuracyStats,
    pub hotspot: HotspotStats,
    pub timing: Option<Timing>,
}

impl MetricsReport {
    /// Internal consistency: probabilities in range and the pooled stats
    /// ordered mean ≤ p99 ≤ max on both error families.
    pub fn validate(&self) -> Result<()> {
        let a = &self.accuracy;
        let ordered = |m: f64, p: f64, x: f64| m <= p && p <= x;
        if !ordered(a.mean_ae_v, a.p99_ae_v, a.max_ae_v) {
            return Err(Error::Invalid(format!(
                "AE stats out of order: mean {} p99 {} max {}",
                a.mean_ae_v, a.p99_ae_v, a.max_ae_v
            )));
        }
        if !ordered(a.mean_re, a.p99_re, a.max_re) {
            return Err(Error::Invalid(format!(
                "RE stats out of order: mean {} p99 {} max {}",
                a.mean_re, a.p99_re, a.max_re
            )));
        }
        if a.max_re > a.max_re_unguarded {
            return Err(Error::Invalid(
                "guarded max RE exceeds unguarded max RE".into(),
            ));
        }
        if let Some(m) = self.hotspot.missing_rate {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::Invalid(format!("missing rate {m} outside [0,1]")));
            }
        }
        if let Some(auc) = self.hotspot.auc {
            if !(0.0..=1.0).contains(&auc) {
                return Err(Error::Invalid(format!("AUC {auc} outside [0,1]")));
            }
        }
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Invalid(format!("serializing report: {e}")))?;
        s.push('\n');
        std::fs::write(path, s).map_err(|e| io_err(path, e))
    }

    pub fn read_json(path: &Path) -> Result<MetricsReport> {
        let s = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&s).map_err(|e| Error::Format {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    /// Flat `metric,value` CSV; absent optional metrics get empty values.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let a = &self.accuracy;
        let h = &self.hotspot;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from("metric,value\n");
        for (name, value) in [
            ("mean_ae_v", a.mean_ae_v.to_string()),
            ("p99_ae_v", a.p99_ae_v.to_string()),
            ("max_ae_v", a.max_ae_v.to_string()),
            ("mean_re", a.mean_re.to_string()),
            ("p99_re", a.p99_re.to_string()),
            ("max_re", a.max_re.to_string()),
            ("max_re_unguarded", a.max_re_unguarded.to_string()),
            ("re_guard_v", a.re_guard_v.to_string()),
            ("re_excluded_tiles", a.re_excluded_tiles.to_string()),
            ("v_spec_v", h.v_spec_v.to_string()),
            ("true_positives", h.true_positives.to_string()),
            ("false_negatives", h.false_negatives.to_string()),
            ("false_positives", h.false_positives.to_string()),
            ("true_negatives", h.true_negatives.to_string()),
            ("missing_rate", opt(h.missing_rate)),
            ("auc", opt(h.auc)),
            (
                "oracle_secs_per_vector",
                opt(self.timing.as_ref().map(|t| t.oracle_secs_per_vector)),
            ),
            (
                "predict_secs_per_vector",
                opt(self.timing.as_ref().map(|t| t.predict_secs_per_vector)),
            ),
            ("speedup", opt(self.timing.as_ref().map(|t| t.speedup))),
        ] {
            s.push_str(name);
            s.push(',');
            s.push_str(&value);
            s.push('\n');
        }
        std::fs::write(path, s).map_err(|e| io_err(path, e))
    }
}

/// Write the report's SVG panels into `dir`: the truth and predicted maps of
/// the sample holding the single largest tile error, that sample's per-tile
/// RE map (guarded tiles shown as 0), and the pooled RE histogram.
pub fn write_report_plots(
    dir: &Path,
    preds: &[NoiseMap],
    truths: &[NoiseMap],
) -> Result<()> {
    if preds.len() != truths.len() || preds.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions paired with {} truth maps",
            preds.len(),
            truths.len()
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut worst = (0usize, f64::NEG_INFINITY);
    let mut pooled_re = Vec::new();
    for (i, (p, t)) in preds.iter().zip(truths).enumerate() {
        for (&pv, &tv) in p.values_v.iter().zip(&t.values_v) {
            let ae = (tv - pv).abs();
            if ae > worst.1 {
                worst = (i, ae);
            }
            if tv >= RE_GUARD_V {
                pooled_re.push(ae / tv);
            }
        }
    }
    let (i, _) = worst;
    let (p, t) = (&preds[i], &truths[i]);
    let re_map: Vec<f64> = p
        .values_v
        .iter()
        .zip(&t.values_v)
        .map(|(&pv, &tv)| if tv >= RE_GUARD_V { (tv - pv).abs() / tv } else { 0.0 })
        .collect();
    let panels = [
        ("truth.svg", t.to_svg(&format!("Worst-case noise, truth (sample {i})"))),
        ("predicted.svg", p.to_svg(&format!("Worst-case noise, predicted (sample {i})"))),
        (
            "re_map.svg",
            svg::heatmap(&re_map, p.m, p.n, &format!("Relative error (sample {i})")),
        ),
        (
            "re_hist.svg",
            svg::histogram(&pooled_re, 30, "Relative error, all test tiles", "relative error"),
        ),
    ];
    for (name, content) in panels {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn map(m: usize, n: usize, values: Vec<f64>) -> NoiseMap {
        assert_eq!(values.len(), m * n);
        NoiseMap { m, n, values_v: values }
    }

    fn random_maps(seed: u64, count: usize, m: usize, n: usize, lo: f64, hi: f64) -> Vec<NoiseMap> {
        let mut r = stream(seed, 77, 0);
        (0..count)
            .map(|_| map(m, n, (0..m * n).map(|_| r.gen_range(lo..hi)).collect()))
            .collect()
    }

    #[test]
    fn identical_maps_give_zero_errors() {
        let truths = random_maps(1, 4, 3, 2, 0.01, 0.2);
        let a = accuracy_metrics(&truths, &truths).unwrap();
        assert_eq!(a.mean_ae_v, 0.0);
        assert_eq!(a.p99_ae_v, 0.0);
        assert_eq!(a.max_ae_v, 0.0);
        assert_eq!(a.mean_re, 0.0);
        assert_eq!(a.max_re, 0.0);
        assert_eq!(a.max_re_unguarded, 0.0);
        assert_eq!(a.re_excluded_tiles, 0);
    }

    #[test]
    fn uniform_bias_on_uniform_truth() {
        let truth = map(5, 4, vec![0.1; 20]);
        let pred = map(5, 4, vec![0.101; 20]);
        let a = accuracy_metrics(&[pred], &[truth]).unwrap();
        assert!((a.mean_ae_v - 1e-3).abs() < 1e-15);
        assert!((a.mean_re - 0.01).abs() < 1e-12);
        // Uniform pool: every statistic equals the common value.
        assert_eq!(a.mean_ae_v, a.p99_ae_v);
        assert_eq!(a.p99_ae_v, a.max_ae_v);
    }

    /// Scalar brute-force recomputation of every statistic on random pairs.
    #[test]
    fn matches_bruteforce_on_random_pairs() {
        let truths = random_maps(2, 6, 4, 3, 0.0005, 0.3);
        let preds = random_maps(3, 6, 4, 3, 0.0005, 0.3);
        let a = accuracy_metrics(&preds, &truths).unwrap();

        let mut aes = Vec::new();
        let mut res = Vec::new();
        let mut unguarded = 0.0f64;
        let mut excluded = 0;
        for i in 0..truths.len() {
            for j in 0..12 {
                let t = truths[i].values_v[j];
                let p = preds[i].values_v[j];
                let ae = (t - p).abs();
                aes.push(ae);
                if t > 0.0 && ae / t > unguarded {
                    unguarded = ae / t;
                }
                if t >= RE_GUARD_V {
                    res.push(ae / t);
                } else {
                    excluded += 1;
                }
            }
        }
        assert!(excluded > 0, "fixture should exercise the guard");
        aes.sort_by(f64::total_cmp);
        res.sort_by(f64::total_cmp);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let p99 = |v: &[f64]| v[((0.99 * v.len() as f64).ceil() as usize).max(1) - 1];
        assert_eq!(a.mean_ae_v, mean(&aes));
        assert_eq!(a.p99_ae_v, p99(&aes));
        assert_eq!(a.max_ae_v, *aes.last().unwrap());
        assert_eq!(a.mean_re, mean(&res));
        assert_eq!(a.p99_re, p99(&res));
        assert_eq!(a.max_re, *res.last().unwrap());
        assert_eq!(a.max_re_unguarded, unguarded);
        assert_eq!(a.re_excluded_tiles, excluded);
    }

    #[test]
    fn absolute_error_is_symmetric_relative_error_is_not() {
        let truths = random_maps(4, 3, 4, 4, 0.02, 0.3);
        let preds = random_maps(5, 3, 4, 4, 0.02, 0.3);
        let fwd = accuracy_metrics(&preds, &truths).unwrap();
        let rev = accuracy_metrics(&truths, &preds).unwrap();
        assert_eq!(fwd.mean_ae_v, rev.mean_ae_v);
        assert_eq!(fwd.max_ae_v, rev.max_ae_v);
        assert_ne!(fwd.mean_re, rev.mean_re);
    }

    #[test]
    fn rejects_ragged_or_mismatched_shapes() {
        let a = random_maps(6, 2, 3, 3, 0.01, 0.2);
        let b = random_maps(7, 3, 3, 3, 0.01, 0.2);
        assert!(matches!(accuracy_metrics(&a, &b), Err(Error::ShapeMismatch(_))));
        let c = random_maps(8, 2, 4, 3, 0.01, 0.2);
        assert!(matches!(accuracy_metrics(&a, &c), Err(Error::ShapeMismatch(_))));
        assert!(matches!(hotspot_metrics(&a, &b, 0.1), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn all_tiles_under_guard_is_an_error() {
        let t = map(2, 2, vec![1e-5; 4]);
        let p = map(2, 2, vec![2e-5; 4]);
        assert!(matches!(
            accuracy_metrics(&[p], &[t]),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn nearest_rank_percentile_on_known_data() {
        let v: Vec<f64> = (1..=200).map(|i| i as f64).collect();
        assert_eq!(nearest_rank(&v, 0.99), 198.0);
        assert_eq!(nearest_rank(&v, 1.0), 200.0);
        assert_eq!(nearest_rank(&[5.0], 0.99), 5.0);
    }

    #[test]
    fn perfect_predictions_score_perfectly() {
        let truths = random_maps(9, 4, 4, 4, 0.05, 0.2);
        let h = hotspot_metrics(&truths, &truths, 0.1).unwrap();
        assert_eq!(h.missing_rate, Some(0.0));
        assert_eq!(h.auc, Some(1.0));
        assert_eq!(h.false_positives, 0);
        assert_eq!(h.false_negatives, 0);
    }

    #[test]
    fn constant_scores_give_half_auc() {
        let truths = random_maps(10, 3, 4, 4, 0.05, 0.2);
        let preds: Vec<NoiseMap> =
            truths.iter().map(|t| map(t.m, t.n, vec![0.07; 16])).collect();
        let h = hotspot_metrics(&preds, &truths, 0.1).unwrap();
        assert_eq!(h.auc, Some(0.5));
    }

    /// Six-tile toy case checked against explicit pair counting.
    #[test]
    fn auc_matches_pair_counting_on_toy_case() {
        let truth = map(6, 1, vec![0.15, 0.05, 0.12, 0.02, 0.11, 0.04]);
        let pred = map(6, 1, vec![0.14, 0.06, 0.09, 0.01, 0.09, 0.12]);
        let h = hotspot_metrics(&[pred.clone()], &[truth.clone()], 0.1).unwrap();

        let labels: Vec<bool> = truth.values_v.iter().map(|&t| t >= 0.1).collect();
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    let (si, sj) = (pred.values_v[i], pred.values_v[j]);
                    if si > sj {
                        wins += 1.0;
                    } else if si == sj {
                        wins += 0.5;
                    }
                }
            }
        }
        assert_eq!(h.auc, Some(wins / pairs));
        // Hot tiles are 0, 2, 4; only tile 0 is flagged (0.14), tiles 2 and 4
        // sit at 0.09 under the budget, and cold tile 5 is a false positive.
        assert_eq!(h.false_positives, 1);
        assert_eq!(h.missing_rate, Some(2.0 / 3.0));
    }

    #[test]
    fn no_true_hotspots_reports_missing_rate_as_absent() {
        let truth = map(2, 2, vec![0.01, 0.02, 0.03, 0.04]);
        let pred = map(2, 2, vec![0.2, 0.01, 0.01, 0.01]);
        let h = hotspot_metrics(&[pred], &[truth], 0.1).unwrap();
        assert_eq!(h.missing_rate, None);
        assert_eq!(h.auc, None, "one class empty leaves the AUC undefined");
        assert_eq!(h.false_positives, 1);
        let json = serde_json::to_string(&h).unwrap();
        assert!(json.contains("\"missing_rate\":null"));
    }

    #[test]
    fn auc_is_invariant_under_monotone_score_transforms() {
        let truths = random_maps(11, 5, 4, 4, 0.04, 0.22);
        let preds = random_maps(12, 5, 4, 4, 0.04, 0.22);
        let cubed: Vec<NoiseMap> = preds
            .iter()
            .map(|p| map(p.m, p.n, p.values_v.iter().map(|v| v.powi(3)).collect()))
            .collect();
        let base = hotspot_metrics(&preds, &truths, 0.1).unwrap();
        // The truth labeling is fixed by the budget; cubing the scores is a
        // strictly monotone transform, so ranks — and the AUC — survive even
        // though the threshold counts on the prediction side change.
        let moved = hotspot_metrics(&cubed, &truths, 0.1).unwrap();
        assert_eq!(base.auc, moved.auc);
    }

    #[test]
    fn counts_are_invariant_under_tile_relabeling() {
        let truths = random_maps(13, 2, 4, 3, 0.04, 0.2);
        let preds = random_maps(14, 2, 4, 3, 0.04, 0.2);
        let mut perm: Vec<usize> = (0..12).collect();
        perm.reverse();
        perm.swap(2, 7);
        let permute = |m: &NoiseMap| {
            map(m.m, m.n, perm.iter().map(|&i| m.values_v[i]).collect())
        };
        let base = hotspot_metrics(&preds, &truths, 0.1).unwrap();
        let shuffled = hotspot_metrics(
            &preds.iter().map(permute).collect::<Vec<_>>(),
            &truths.iter().map(permute).collect::<Vec<_>>(),
            0.1,
        )
        .unwrap();
        assert_eq!(base, shuffled);
    }

    #[test]
    fn report_round_trips_and_validates() {
        let truths = random_maps(15, 4, 4, 4, 0.02, 0.25);
        let preds = random_maps(16, 4, 4, 4, 0.02, 0.25);
        let report = MetricsReport {
            accuracy: accuracy_metrics(&preds, &truths).unwrap(),
            hotspot: hotspot_metrics(&preds, &truths, 0.1).unwrap(),
            timing: Some(Timing {
                oracle_secs_per_vector: 2.0,
                predict_secs_per_vector: 0.1,
                speedup: 20.0,
                threads: 1,
            }),
        };
        report.validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let json_path = dir.path().join("report.json");
        report.write_json(&json_path).unwrap();
        let back = MetricsReport::read_json(&json_path).unwrap();
        assert_eq!(report, back);
        let csv_path = dir.path().join("report.csv");
        report.write_csv(&csv_path).unwrap();
        let csv = std::fs::read_to_string(&csv_path).unwrap();
        assert!(csv.starts_with("metric,value\n"));
        assert_eq!(csv.lines().count(), 20);
        assert!(csv.contains("speedup,20"));
    }

    #[test]
    fn validate_rejects_out_of_order_stats() {
        let truths = random_maps(17, 2, 3, 3, 0.02, 0.25);
        let preds = random_maps(18, 2, 3, 3, 0.02, 0.25);
        let mut report = MetricsReport {
            accuracy: accuracy_metrics(&preds, &truths).unwrap(),
            hotspot: hotspot_metrics(&preds, &truths, 0.1).unwrap(),
            timing: None,
        };
        report.accuracy.mean_ae_v = report.accuracy.max_ae_v * 2.0;
        assert!(report.validate().is_err());
    }

    #[test]
    fn median_of_three_ignores_one_outlier() {
        assert_eq!(median3([5.0, 1.0, 100.0]), 5.0);
        assert_eq!(median3([2.0, 2.0, 2.0]), 2.0);
    }

    /// Small untrained end-to-end fixture: a real grid, three vectors, their
    /// simulated truths, and a fresh model over 4×4 tiles.
    fn bench_fixture() -> (
        PdnGrid,
        Tiling,
        TransientSystem,
        Vec<CurrentTrace>,
        Vec<TileCurrentMaps>,
        Vec<NoiseMap>,
        Model,
        Tensor,
    ) {
        use crate::dataset::tests::{small_grid, small_vspec};
        use crate::features::{distance_tensor, FeatureStats};
        use crate::model::ModelConfig;
        use crate::tiling::build_tiling;
        use crate::vectors::generate_trace;

        let grid = small_grid();
        let tiling = build_tiling(&grid, 4, 4).unwrap();
        let vspec = small_vspec();
        let traces: Vec<CurrentTrace> =
            (0..3).map(|i| generate_trace(&vspec, &grid, i).unwrap()).collect();
        let mut sys = TransientSystem::stamp(&grid, vspec.dt_s).unwrap();
        sys.factor().unwrap();
        let truths: Vec<NoiseMap> = traces
            .iter()
            .map(|t| simulate_noise_map(&sys, &grid, t, &tiling).unwrap())
            .collect();
        let maps: Vec<TileCurrentMaps> =
            traces.iter().map(|t| tile_current_maps(t, &tiling).unwrap()).collect();
        let stats =
            FeatureStats::fit(maps.iter(), grid.die_diagonal_um(), truths.iter()).unwrap();
        let dist = distance_tensor(&grid, &tiling);
        let config = ModelConfig {
            c1: 2,
            c2: 2,
            c3: 2,
            ..ModelConfig::new(4, 4, grid.bumps.len(), 5)
        };
        let model = Model::new(config, stats).unwrap();
        let dist_norm = model.normalize_distance(&dist).unwrap();
        (grid, tiling, sys, traces, maps, truths, model, dist_norm)
    }

    #[test]
    fn benchmark_times_both_sides() {
        let (grid, tiling, sys, traces, _, _, model, dist_norm) = bench_fixture();
        let t = benchmark(&model, &dist_norm, &sys, &grid, &tiling, &traces, 0.5, 0.1).unwrap();
        assert!(t.oracle_secs_per_vector > 0.0);
        assert!(t.predict_secs_per_vector > 0.0);
        assert!(
            (t.speedup - t.oracle_secs_per_vector / t.predict_secs_per_vector).abs() < 1e-12
        );
        assert_eq!(t.threads, 1);
        assert!(matches!(
            benchmark(&model, &dist_norm, &sys, &grid, &tiling, &[], 0.5, 0.1),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn sweep_rows_follow_the_requested_rates() {
        let (_, _, _, _, maps, truths, model, dist_norm) = bench_fixture();
        let rates = [0.25, 0.5, 0.75];
        let rows = sweep_compression(&model, &dist_norm, &maps, &truths, &rates, 0.1).unwrap();
        assert_eq!(rows.len(), 3);
        for (row, &r) in rows.iter().zip(&rates) {
            assert_eq!(row.rate, r);
            assert!(row.mean_re.is_finite() && row.mean_re >= 0.0);
            assert!(row.mean_ae_v.is_finite() && row.mean_ae_v >= 0.0);
            assert!(row.predict_secs_per_vector > 0.0);
        }
        // The model is fixed, so error columns are deterministic: rerunning
        // must reproduce them exactly even though timings move.
        let again = sweep_compression(&model, &dist_norm, &maps, &truths, &rates, 0.1).unwrap();
        for (a, b) in rows.iter().zip(&again) {
            assert_eq!(a.mean_re.to_bits(), b.mean_re.to_bits());
            assert_eq!(a.mean_ae_v.to_bits(), b.mean_ae_v.to_bits());
        }

        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("sweep.csv");
        write_sweep_csv(&rows, &csv_path).unwrap();
        let csv = std::fs::read_to_string(&csv_path).unwrap();
        assert!(csv.starts_with("rate,mean_re,mean_ae_v,predict_secs_per_vector\n"));
        assert_eq!(csv.lines().count(), 4);
        let (re_svg, rt_svg) = sweep_plots(&rows);
        assert!(re_svg.starts_with("<svg") && rt_svg.starts_with("<svg"));
    }

    #[test]
    fn report_plots_cover_all_panels() {
        let truths = random_maps(19, 3, 4, 4, 0.02, 0.25);
        let preds = random_maps(20, 3, 4, 4, 0.02, 0.25);
        let dir = tempfile::tempdir().unwrap();
        write_report_plots(dir.path(), &preds, &truths).unwrap();
        for name in ["truth.svg", "predicted.svg", "re_map.svg", "re_hist.svg"] {
            let s = std::fs::read_to_string(dir.path().join(name)).unwrap();
            assert!(s.starts_with("<svg"), "{name} is not an SVG");
        }
    }
}
