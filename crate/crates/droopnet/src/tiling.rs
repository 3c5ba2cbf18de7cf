//! Spatial tiling: partition the die into an m×n array of rectangular tiles
//! and aggregate per-load currents into per-tile current maps.
//!
//! Tile `(tx, ty)` covers the half-open x-interval `((tx)·W/m, (tx+1)·W/m]`
//! (and likewise in y), except tile 0 which also includes the lower edge —
//! i.e. points exactly on a tile boundary belong to the lower-index tile.
//! Map layout is row-major with x fastest: index `ty·m + tx`.

use crate::error::{Error, Result};
use crate::grid::PdnGrid;
use crate::sim::CurrentTrace;
use serde::{Deserialize, Serialize};

/// A rectangular partition of the die with per-node/per-load assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tiling {
    /// Tile counts along x and y.
    pub m: usize,
    pub n: usize,
    pub die_w_um: f64,
    pub die_h_um: f64,
    /// Tile index (`ty·m + tx`) of every grid node.
    pub node_tile: Vec<usize>,
    /// Tile index of every load (parallel to `grid.loads`).
    pub load_tile: Vec<usize>,
    /// Tile-center coordinates in µm, indexed like the maps.
    pub centers_um: Vec<(f64, f64)>,
}

/// One-axis tile index with boundary-to-lower-tile semantics.
///
/// Coordinates within 1e-9 tiles of an exact boundary are snapped onto it so
/// mesh positions computed in floating point land deterministically.
fn axis_tile(coord: f64, extent: f64, tiles: usize) -> usize {
    let raw = coord * tiles as f64 / extent;
    let snapped = if (raw - raw.round()).abs() < 1e-9 { raw.round() } else { raw };
    let idx = snapped.ceil() as isize - 1;
    idx.clamp(0, tiles as isize - 1) as usize
}

/// Build the uniform m×n tiling of `grid`'s die and assign nodes and loads.
pub fn build_tiling(grid: &PdnGrid, m: usize, n: usize) -> Result<Tiling> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidSpec(format!("tiling {m}×{n} must be ≥ 1×1")));
    }
    let assign = |&(x, y): &(f64, f64)| {
        axis_tile(y, grid.die_h_um, n) * m + axis_tile(x, grid.die_w_um, m)
    };
    let node_tile: Vec<usize> = grid.nodes_um.iter().map(assign).collect();
    let load_tile: Vec<usize> = grid.loads.iter().map(|&l| node_tile[l]).collect();
    let mut centers_um = Vec::with_capacity(m * n);
    for ty in 0..n {
        for tx in 0..m {
            centers_um.push((
                (tx as f64 + 0.5) * grid.die_w_um / m as f64,
                (ty as f64 + 0.5) * grid.die_h_um / n as f64,
            ));
        }
    }
    Ok(Tiling { m, n, die_w_um: grid.die_w_um, die_h_um: grid.die_h_um, node_tile, load_tile, centers_um })
}

impl Tiling {
    pub fn tiles(&self) -> usize {
        self.m * self.n
    }
}

/// A sequence of per-tile current maps, one m×n map per time stamp.
///
/// Storage is stamp-major: `maps[k·m·n + ty·m + tx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TileCurrentMaps {
    pub m: usize,
    pub n: usize,
    pub dt_s: f64,
    pub maps: Vec<f64>,
}

impl TileCurrentMaps {
    pub fn n_stamps(&self) -> usize {
        if self.m * self.n == 0 {
            0
        } else {
            self.maps.len() / (self.m * self.n)
        }
    }

    /// Map for stamp `k` as a flat m×n slice.
    pub fn stamp(&self, k: usize) -> &[f64] {
        let sz = self.m * self.n;
        &self.maps[k * sz..(k + 1) * sz]
    }
}

/// Sum load currents into their tiles at every stamp.
///
/// Total current is conserved: for each stamp, the map sums to the sum of all
/// load currents at that stamp (same additions, reassociated per tile).
pub fn tile_current_maps(trace: &CurrentTrace, tiling: &Tiling) -> Result<TileCurrentMaps> {
    if trace.n_loads != tiling.load_tile.len() {
        return Err(Error::ShapeMismatch(format!(
            "trace has {} loads, tiling assigns {}",
            trace.n_loads,
            tiling.load_tile.len()
        )));
    }
    let sz = tiling.tiles();
    let n_stamps = trace.n_stamps();
    let mut maps = vec![0.0; n_stamps * sz];
    for k in 0..n_stamps {
        let row = &trace.currents_a[k * trace.n_loads..(k + 1) * trace.n_loads];
        let out = &mut maps[k * sz..(k + 1) * sz];
        for (l, &cur) in row.iter().enumerate() {
            out[tiling.load_tile[l]] += cur;
        }
    }
    Ok(TileCurrentMaps { m: tiling.m, n: tiling.n, dt_s: trace.dt_s, maps })
}
