//! Temporal compression of a current-map sequence.
//!
//! The compressor keeps `round(r·N)` of the `N` stamps, chosen to preserve
//! the tail statistic `μ + 3σ` of the per-stamp total current. Candidate
//! kept-sets take the `⌊r₀·N⌋` smallest-total stamps plus enough largest-
//! total stamps to reach the quota, for each split `r₀ ∈ {0, Δr, 2Δr, … ≤ r}`;
//! the split whose kept subset best matches the full sequence's `μ + 3σ`
//! wins.
//!
//! Numeric conventions (shared bit-for-bit by the test oracle):
//! - per-stamp totals are summed in tile index order;
//! - σ is the population standard deviation (divisor N, resp. kept count);
//! - the argsort is ascending and stable with stamp index as tie-break;
//! - `⌊x⌋` guards against representation error as `floor(x + 1e-9)`;
//! - subset statistics sum kept totals in chronological order;
//! - the first split achieving the minimal objective wins ties.

use crate::error::{Error, Result};
use crate::tiling::TileCurrentMaps;
use serde::{Deserialize, Serialize};

/// Outcome of selecting kept stamps from a totals sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StampSelection {
    /// Kept stamp indices, strictly increasing.
    pub kept: Vec<usize>,
    /// Winning split r₀.
    pub r_s: f64,
    /// Achieved |(μ_s + 3σ_s) − (μ_c + 3σ_c)|.
    pub d_min: f64,
}

/// A compressed map sequence: the selection plus the surviving maps.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionResult {
    pub selection: StampSelection,
    pub maps: TileCurrentMaps,
}

/// Population mean and standard deviation of `values` summed in the given
/// order. Exposed so oracles can reproduce the arithmetic exactly.
pub fn mean_std(values: impl Iterator<Item = f64> + Clone, count: usize) -> (f64, f64) {
    let sum: f64 = values.clone().sum();
    let mean = sum / count as f64;
    let sq: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (sq / count as f64).sqrt())
}

/// Choose the kept stamps for a totals sequence `s`.
pub fn select_stamps(s: &[f64], r: f64, dr: f64) -> Result<StampSelection> {
    let n = s.len();
    if n < 2 {
        return Err(Error::Invalid(format!("need ≥ 2 stamps, got {n}")));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Invalid(format!("compression rate r={r} outside (0, 1)")));
    }
    if !(dr > 0.0) {
        return Err(Error::Invalid(format!("split step Δr={dr} must be > 0")));
    }
    let keep = (r * n as f64).round() as usize;
    if keep == 0 {
        return Err(Error::InvalidRate { rate: r, stamps: n });
    }

    let (mu_s, sigma_s) = mean_std(s.iter().copied(), n);
    let target = mu_s + 3.0 * sigma_s;

    // Ascending stable argsort with index tie-break.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap().then(a.cmp(&b)));

    let splits = ((r / dr) + 1e-9).floor() as usize;
    let mut best: Option<(f64, f64, Vec<usize>)> = None; // (d, r0, kept)
    let mut kept = Vec::with_capacity(keep);
    for i in 0..=splits {
        let r0 = i as f64 * dr;
        let low = (((r0 * n as f64) + 1e-9).floor() as usize).min(keep);
        let high = keep - low;
        kept.clear();
        kept.extend_from_slice(&order[..low]);
        kept.extend_from_slice(&order[n - high..]);
        kept.sort_unstable();
        let (mu_c, sigma_c) = mean_std(kept.iter().map(|&k| s[k]), keep);
        let d = (target - (mu_c + 3.0 * sigma_c)).abs();
        if best.as_ref().map_or(true, |(bd, _, _)| d < *bd) {
            best = Some((d, r0, kept.clone()));
        }
    }
    let (d_min, r_s, kept) = best.expect("at least the r0=0 split is evaluated");
    Ok(StampSelection { kept, r_s, d_min })
}

/// Per-stamp total current, summed in tile index order.
pub fn stamp_totals(maps: &TileCurrentMaps) -> Vec<f64> {
    (0..maps.n_stamps()).map(|k| maps.stamp(k).iter().sum()).collect()
}

/// Compress a map sequence: select stamps on the totals, then gather the
/// surviving maps in chronological order. Map values are copied unaltered.
pub fn temporal_compress(maps: &TileCurrentMaps, r: f64, dr: f64) -> Result<CompressionResult> {
    let totals = stamp_totals(maps);
    let selection = select_stamps(&totals, r, dr)?;
    let sz = maps.m * maps.n;
    let mut out = Vec::with_capacity(selection.kept.len() * sz);
    for &k in &selection.kept {
        out.extend_from_slice(maps.stamp(k));
    }
    Ok(CompressionResult {
        selection,
        maps: TileCurrentMaps { m: maps.m, n: maps.n, dt_s: maps.dt_s, maps: out },
    })
}
