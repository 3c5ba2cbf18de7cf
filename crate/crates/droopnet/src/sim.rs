//! Transient ground-truth simulation and worst-case tile noise reduction.
//!
//! Droops are solved in `u = vdd − v` coordinates from a quiescent start
//! (`u[0] = 0`): one backward-Euler step per stamp, one shared Cholesky
//! factorization for the whole trace. The worst-case noise map takes, per
//! tile, the maximum droop over every node in the tile and every stamp; the
//! map's maximum therefore equals the global (node, stamp) maximum exactly.

use crate::error::{io_err, Error, Result};
use crate::grid::PdnGrid;
use crate::system::{TransientSystem, SOLVE_LANES};
use crate::tiling::Tiling;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Load currents over time, stamp-major: `currents_a[k·n_loads + l]` is the
/// current drawn by load `l` at stamp `k` (amperes, nonnegative).
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentTrace {
    pub dt_s: f64,
    pub n_loads: usize,
    pub currents_a: Vec<f64>,
}

impl CurrentTrace {
    pub fn n_stamps(&self) -> usize {
        if self.n_loads == 0 {
            0
        } else {
            self.currents_a.len() / self.n_loads
        }
    }

    /// Currents of all loads at stamp `k`.
    pub fn stamp(&self, k: usize) -> &[f64] {
        &self.currents_a[k * self.n_loads..(k + 1) * self.n_loads]
    }

    pub fn validate_for(&self, grid: &PdnGrid) -> Result<()> {
        if self.n_loads != grid.n_loads() {
            return Err(Error::ShapeMismatch(format!(
                "trace has {} load waveforms, grid has {} loads",
                self.n_loads,
                grid.n_loads()
            )));
        }
        if self.n_stamps() == 0 {
            return Err(Error::Invalid("trace has zero stamps".into()));
        }
        if self.currents_a.len() % self.n_loads != 0 {
            return Err(Error::ShapeMismatch(
                "trace length not a multiple of load count".into(),
            ));
        }
        Ok(())
    }
}

/// Per-tile worst-case droop in volts, row-major (`values_v[ty·m + tx]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMap {
    pub m: usize,
    pub n: usize,
    pub values_v: Vec<f64>,
}

impl NoiseMap {
    pub fn max(&self) -> f64 {
        self.values_v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Write as CSV, one row of tiles per line, row 0 first.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        for ty in 0..self.n {
            let row: Vec<String> = (0..self.m)
                .map(|tx| format!("{:.9e}", self.values_v[ty * self.m + tx]))
                .collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        std::fs::write(path, s).map_err(|e| io_err(path, e))
    }

    /// Render as an SVG heatmap.
    pub fn to_svg(&self, title: &str) -> String {
        crate::svg::heatmap(&self.values_v, self.m, self.n, title)
    }
}

/// Advance one trace through a factored system, handing each stamp's droop
/// vector to `on_stamp(k, droops)`.
pub fn run_trace(
    sys: &TransientSystem,
    grid: &PdnGrid,
    trace: &CurrentTrace,
    mut on_stamp: impl FnMut(usize, &[f64]),
) -> Result<()> {
    trace.validate_for(grid)?;
    if sys.dt_s != Some(trace.dt_s) {
        return Err(Error::Invalid(format!(
            "system stamped for dt {:?}, trace has dt {}",
            sys.dt_s, trace.dt_s
        )));
    }
    if !sys.is_factored() {
        return Err(Error::Invalid("system not factored".into()));
    }
    let n = sys.n;
    let mut u = vec![0.0f64; n];
    let mut rhs = vec![0.0f64; n];
    let mut branch_hist: Vec<f64> = vec![0.0; sys.bump_stamps.len()];
    let has_l = sys.bump_stamps.iter().any(|b| b.hist_coef != 0.0);
    for k in 0..trace.n_stamps() {
        for i in 0..n {
            rhs[i] = sys.cap_over_dt[i] * u[i];
        }
        for (l, &node) in grid.loads.iter().enumerate() {
            rhs[node] += trace.currents_a[k * trace.n_loads + l];
        }
        if has_l {
            for (b, stamp) in sys.bump_stamps.iter().enumerate() {
                rhs[stamp.node] -= branch_hist[b];
            }
        }
        sys.solve_in_place(&mut rhs)?;
        std::mem::swap(&mut u, &mut rhs);
        if has_l {
            for (b, stamp) in sys.bump_stamps.iter().enumerate() {
                // I_b[k] = g_eq·u + h[k]; next stamp's h = hist_coef·I_b[k].
                let ib = stamp.g_eq * u[stamp.node] + branch_hist[b];
                branch_hist[b] = stamp.hist_coef * ib;
            }
        }
        on_stamp(k, &u);
    }
    Ok(())
}

/// Solve the full droop sequence of a trace (stamps × nodes). Intended for
/// small grids and tests; memory grows with N·n_nodes.
pub fn simulate(grid: &PdnGrid, trace: &CurrentTrace) -> Result<Vec<Vec<f64>>> {
    let mut sys = TransientSystem::stamp(grid, trace.dt_s)?;
    sys.factor()?;
    let mut out = Vec::with_capacity(trace.n_stamps());
    run_trace(&sys, grid, trace, |_, u| out.push(u.to_vec()))?;
    Ok(out)
}

/// Reduce a droop sequence to the per-tile worst-case noise map.
pub fn worst_case_tile_noise(droops: &[Vec<f64>], tiling: &Tiling) -> NoiseMap {
    let mut acc = TileMaxAccumulator::new(tiling);
    for u in droops {
        acc.update(u);
    }
    acc.finish()
}

/// Running per-tile maximum over droop vectors.
pub struct TileMaxAccumulator<'a> {
    tiling: &'a Tiling,
    values: Vec<f64>,
}

impl<'a> TileMaxAccumulator<'a> {
    pub fn new(tiling: &'a Tiling) -> Self {
        TileMaxAccumulator { tiling, values: vec![f64::NEG_INFINITY; tiling.tiles()] }
    }

    pub fn update(&mut self, droops: &[f64]) {
        debug_assert_eq!(droops.len(), self.tiling.node_tile.len());
        for (i, &t) in self.tiling.node_tile.iter().enumerate() {
            if droops[i] > self.values[t] {
                self.values[t] = droops[i];
            }
        }
    }

    pub fn finish(self) -> NoiseMap {
        let mut values = self.values;
        for (t, v) in values.iter_mut().enumerate() {
            if *v == f64::NEG_INFINITY {
                log::warn!(
                    "tile {} contains no nodes; worst-case noise reported as 0",
                    t
                );
                *v = 0.0;
            }
        }
        NoiseMap { m: self.tiling.m, n: self.tiling.n, values_v: values }
    }
}

/// Simulate one trace and reduce to its noise map without materializing the
/// droop sequence.
pub fn simulate_noise_map(
    sys: &TransientSystem,
    grid: &PdnGrid,
    trace: &CurrentTrace,
    tiling: &Tiling,
) -> Result<NoiseMap> {
    let mut acc = TileMaxAccumulator::new(tiling);
    run_trace(sys, grid, trace, |_, u| acc.update(u))?;
    Ok(acc.finish())
}

/// Simulate a batch of traces through one factorization, advancing up to
/// [`SOLVE_LANES`] traces in lockstep so the factor is streamed from memory
/// once per 8 solves instead of once per solve. Arithmetic per trace is
/// identical to [`simulate_noise_map`] (the lane solver is bit-compatible
/// with the scalar solver), so results do not depend on batch grouping.
pub fn simulate_noise_maps_batch(
    sys: &TransientSystem,
    grid: &PdnGrid,
    traces: &[&CurrentTrace],
    tiling: &Tiling,
) -> Result<Vec<NoiseMap>> {
    let n = sys.n;
    let mut out = Vec::with_capacity(traces.len());
    for chunk in traces.chunks(SOLVE_LANES) {
        for trace in chunk {
            trace.validate_for(grid)?;
            if sys.dt_s != Some(trace.dt_s) {
                return Err(Error::Invalid(format!(
                    "system stamped for dt {:?}, trace has dt {}",
                    sys.dt_s, trace.dt_s
                )));
            }
        }
        if !sys.is_factored() {
            return Err(Error::Invalid("system not factored".into()));
        }
        let lanes = chunk.len();
        let n_stamps = chunk.iter().map(|t| t.n_stamps()).max().unwrap_or(0);
        let mut u = vec![[0.0f64; SOLVE_LANES]; n];
        let mut rhs = vec![[0.0f64; SOLVE_LANES]; n];
        let mut hist = vec![[0.0f64; SOLVE_LANES]; sys.bump_stamps.len()];
        let has_l = sys.bump_stamps.iter().any(|b| b.hist_coef != 0.0);
        let mut accs: Vec<TileMaxAccumulator> =
            chunk.iter().map(|_| TileMaxAccumulator::new(tiling)).collect();
        let mut lane_view = vec![0.0f64; n];
        for k in 0..n_stamps {
            for i in 0..n {
                let cod = sys.cap_over_dt[i];
                for lane in 0..SOLVE_LANES {
                    rhs[i][lane] = cod * u[i][lane];
                }
            }
            for (lane, trace) in chunk.iter().enumerate() {
                if k < trace.n_stamps() {
                    for (l, &node) in grid.loads.iter().enumerate() {
                        rhs[node][lane] += trace.currents_a[k * trace.n_loads + l];
                    }
                }
            }
            if has_l {
                for (b, stamp) in sys.bump_stamps.iter().enumerate() {
                    for lane in 0..lanes {
                        rhs[stamp.node][lane] -= hist[b][lane];
                    }
                }
            }
            sys.solve_lanes_in_place(&mut rhs)?;
            std::mem::swap(&mut u, &mut rhs);
            if has_l {
                for (b, stamp) in sys.bump_stamps.iter().enumerate() {
                    for lane in 0..lanes {
                        let ib = stamp.g_eq * u[stamp.node][lane] + hist[b][lane];
                        hist[b][lane] = stamp.hist_coef * ib;
                    }
                }
            }
            for (lane, acc) in accs.iter_mut().enumerate() {
                if k < chunk[lane].n_stamps() {
                    for i in 0..n {
                        lane_view[i] = u[i][lane];
                    }
                    acc.update(&lane_view);
                }
            }
        }
        out.extend(accs.into_iter().map(TileMaxAccumulator::finish));
    }
    Ok(out)
}

/// Steady-state droop under constant load currents: solves the G-only system.
pub fn dc_solve(grid: &PdnGrid, load_currents_a: &[f64]) -> Result<Vec<f64>> {
    if load_currents_a.len() != grid.n_loads() {
        return Err(Error::ShapeMismatch(format!(
            "{} currents for {} loads",
            load_currents_a.len(),
            grid.n_loads()
        )));
    }
    let mut sys = TransientSystem::stamp_dc(grid)?;
    sys.factor()?;
    let mut rhs = vec![0.0; sys.n];
    for (l, &node) in grid.loads.iter().enumerate() {
        rhs[node] += load_currents_a[l];
    }
    sys.solve_in_place(&mut rhs)?;
    Ok(rhs)
}
