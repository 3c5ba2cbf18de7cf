//! Power-grid synthesis and validation.
//!
//! A [`PdnGrid`] is a regular RC mesh on a rectangular die: nodes carry a
//! decoupling capacitance to ground, edges carry mesh conductances, a subset
//! of nodes connect to the package supply through series-R(L) bump branches,
//! and another subset draws load current. [`generate_grid`] synthesizes such
//! a grid deterministically from a [`GridSpec`]; [`validate_grid`] checks the
//! structural rules every consumer of a grid relies on.

use crate::error::{io_err, Error, Result};
use crate::rng::{purpose, stream};
use rand::seq::index::sample as index_sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Current major version of the on-disk grid schema.
pub const GRID_FORMAT_VERSION: u32 = 1;

/// A mesh edge: conductance `g_s` (siemens) between nodes `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub g_s: f64,
}

/// A bump branch: series resistance (and optional series inductance) from
/// `node` to the ideal package supply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub node: usize,
    pub res_ohm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ind_h: Option<f64>,
}

/// An on-die power grid with bumps and load attachment points.
///
/// Units are embedded in field names: positions in µm, conductance in S,
/// capacitance in F, resistance in Ω, inductance in H, voltage in V.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdnGrid {
    pub die_w_um: f64,
    pub die_h_um: f64,
    /// Node positions (x, y) in µm.
    pub nodes_um: Vec<(f64, f64)>,
    pub edges: Vec<Edge>,
    /// Per-node capacitance to ground in F.
    pub node_caps_f: Vec<f64>,
    pub bumps: Vec<Bump>,
    /// Node ids that draw load current.
    pub loads: Vec<usize>,
    /// Nominal supply in V.
    pub vdd_v: f64,
}

impl PdnGrid {
    pub fn n_nodes(&self) -> usize {
        self.nodes_um.len()
    }

    pub fn n_loads(&self) -> usize {
        self.loads.len()
    }

    /// Die diagonal in µm (used as the distance normalization scale).
    pub fn die_diagonal_um(&self) -> f64 {
        (self.die_w_um * self.die_w_um + self.die_h_um * self.die_h_um).sqrt()
    }
}

/// Parameters for synthesizing a regular-mesh grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub die_w_um: f64,
    pub die_h_um: f64,
    /// Mesh pitch in µm; node count per axis = floor(extent/pitch) + 1.
    pub pitch_um: f64,
    /// Wire resistance per µm of mesh segment (Ω/µm).
    pub res_per_um: f64,
    /// Per-node decap range [min, max] in F, sampled uniformly.
    pub cap_min_f: f64,
    pub cap_max_f: f64,
    pub bump_count: usize,
    pub bump_res_ohm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump_ind_h: Option<f64>,
    pub load_count: usize,
    pub vdd_v: f64,
    pub seed: u64,
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        let pos = [
            ("die_w_um", self.die_w_um),
            ("die_h_um", self.die_h_um),
            ("pitch_um", self.pitch_um),
            ("res_per_um", self.res_per_um),
            ("cap_min_f", self.cap_min_f),
            ("cap_max_f", self.cap_max_f),
            ("bump_res_ohm", self.bump_res_ohm),
            ("vdd_v", self.vdd_v),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidSpec(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(l) = self.bump_ind_h {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::InvalidSpec(format!("bump_ind_h must be positive, got {l}")));
            }
        }
        if self.cap_max_f < self.cap_min_f {
            return Err(Error::InvalidSpec("cap_max_f < cap_min_f".into()));
        }
        if self.bump_count == 0 {
            return Err(Error::InvalidSpec("bump_count must be ≥ 1".into()));
        }
        if self.load_count == 0 {
            return Err(Error::InvalidSpec("load_count must be ≥ 1".into()));
        }
        if self.pitch_um > self.die_w_um || self.pitch_um > self.die_h_um {
            return Err(Error::InvalidSpec("pitch larger than die".into()));
        }
        Ok(())
    }
}

/// Synthesize a regular-mesh grid from `spec`, deterministically per seed.
///
/// Nodes form an axis-aligned mesh with the spec's pitch. Bumps sit on a
/// jittered uniform lattice snapped to distinct mesh nodes; loads are drawn
/// uniformly at random from the remaining nodes.
pub fn generate_grid(spec: &GridSpec) -> Result<PdnGrid> {
    spec.validate()?;
    let nx = (spec.die_w_um / spec.pitch_um).floor() as usize + 1;
    let ny = (spec.die_h_um / spec.pitch_um).floor() as usize + 1;
    let n = nx * ny;
    if spec.bump_count > n {
        return Err(Error::InvalidSpec(format!(
            "bump_count {} exceeds node count {n}",
            spec.bump_count
        )));
    }
    if spec.load_count > n - spec.bump_count {
        return Err(Error::InvalidSpec(format!(
            "load_count {} exceeds non-bump node count {}",
            spec.load_count,
            n - spec.bump_count
        )));
    }

    let mut nodes = Vec::with_capacity(n);
    for iy in 0..ny {
        for ix in 0..nx {
            nodes.push((ix as f64 * spec.pitch_um, iy as f64 * spec.pitch_um));
        }
    }

    let g = 1.0 / (spec.res_per_um * spec.pitch_um);
    let mut edges = Vec::with_capacity(2 * n);
    for iy in 0..ny {
        for ix in 0..nx {
            let a = iy * nx + ix;
            if ix + 1 < nx {
                edges.push(Edge { a, b: a + 1, g_s: g });
            }
            if iy + 1 < ny {
                edges.push(Edge { a, b: a + nx, g_s: g });
            }
        }
    }

    let mut cap_rng = stream(spec.seed, purpose::GRID_CAPS, 0);
    let node_caps_f: Vec<f64> =
        (0..n).map(|_| cap_rng.gen_range(spec.cap_min_f..=spec.cap_max_f)).collect();

    // Bumps: jitter a ceil(sqrt(B))² lattice of cell centers, snap each to the
    // nearest mesh node, and resolve collisions toward the next free node id.
    let mut bump_rng = stream(spec.seed, purpose::GRID_BUMPS, 0);
    let side = (spec.bump_count as f64).sqrt().ceil() as usize;
    let (cell_w, cell_h) = (spec.die_w_um / side as f64, spec.die_h_um / side as f64);
    let mut taken = vec![false; n];
    let mut bumps = Vec::with_capacity(spec.bump_count);
    'cells: for cy in 0..side {
        for cx in 0..side {
            if bumps.len() == spec.bump_count {
                break 'cells;
            }
            let x = (cx as f64 + 0.5) * cell_w + bump_rng.gen_range(-0.25..=0.25) * cell_w;
            let y = (cy as f64 + 0.5) * cell_h + bump_rng.gen_range(-0.25..=0.25) * cell_h;
            let ix = (x / spec.pitch_um).round().clamp(0.0, (nx - 1) as f64) as usize;
            let iy = (y / spec.pitch_um).round().clamp(0.0, (ny - 1) as f64) as usize;
            let mut node = iy * nx + ix;
            while taken[node] {
                node = (node + 1) % n;
            }
            taken[node] = true;
            bumps.push(Bump {
                node,
                res_ohm: spec.bump_res_ohm,
                ind_h: spec.bump_ind_h,
            });
        }
    }

    let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
    let mut load_rng = stream(spec.seed, purpose::GRID_LOADS, 0);
    let mut picks: Vec<usize> = index_sample(&mut load_rng, free.len(), spec.load_count)
        .into_iter()
        .map(|i| free[i])
        .collect();
    picks.sort_unstable();

    Ok(PdnGrid {
        die_w_um: spec.die_w_um,
        die_h_um: spec.die_h_um,
        nodes_um: nodes,
        edges,
        node_caps_f,
        bumps,
        loads: picks,
        vdd_v: spec.vdd_v,
    })
}

/// Check every structural rule a grid must satisfy; returns one human-readable
/// diagnostic per violation. Empty result means the grid is valid.
pub fn validate_grid(grid: &PdnGrid) -> Vec<String> {
    let n = grid.n_nodes();
    let mut diags = Vec::new();

    if grid.node_caps_f.len() != n {
        diags.push(format!("cap count {} != node count {n}", grid.node_caps_f.len()));
    }
    for (i, &c) in grid.node_caps_f.iter().enumerate() {
        if !(c > 0.0) || !c.is_finite() {
            diags.push(format!("node {i}: capacitance {c} not strictly positive"));
        }
    }
    for (k, e) in grid.edges.iter().enumerate() {
        if e.a >= n || e.b >= n || e.a == e.b {
            diags.push(format!("edge {k}: bad endpoints ({}, {})", e.a, e.b));
        }
        if !(e.g_s > 0.0) || !e.g_s.is_finite() {
            diags.push(format!("edge {k}: conductance {} not strictly positive", e.g_s));
        }
    }
    for (k, b) in grid.bumps.iter().enumerate() {
        if b.node >= n {
            diags.push(format!("bump {k}: node {} out of range", b.node));
        }
        if !(b.res_ohm > 0.0) || !b.res_ohm.is_finite() {
            diags.push(format!("bump {k}: resistance {} not strictly positive", b.res_ohm));
        }
        if let Some(l) = b.ind_h {
            if !(l > 0.0) || !l.is_finite() {
                diags.push(format!("bump {k}: inductance {l} not strictly positive"));
            }
        }
    }
    for (k, &l) in grid.loads.iter().enumerate() {
        if l >= n {
            diags.push(format!("load {k}: node {l} out of range"));
        }
    }
    let mut seen = std::collections::HashSet::new();
    for b in &grid.bumps {
        if !seen.insert(b.node) {
            diags.push(format!("duplicate bump node {}", b.node));
        }
    }
    let mut seen = std::collections::HashSet::new();
    for &l in &grid.loads {
        if !seen.insert(l) {
            diags.push(format!("duplicate load node {l}"));
        }
    }
    if grid.bumps.is_empty() {
        diags.push("grid has no bumps; system would be singular at DC".into());
    }
    if !(grid.vdd_v > 0.0) {
        diags.push(format!("vdd {} not strictly positive", grid.vdd_v));
    }

    // Every node must reach a bump through edges, otherwise its DC equation is
    // floating. One BFS from all bump nodes covers connectivity + reachability.
    if n > 0 && !grid.bumps.is_empty() && grid.bumps.iter().all(|b| b.node < n) {
        let mut adj = vec![Vec::new(); n];
        for e in &grid.edges {
            if e.a < n && e.b < n {
                adj[e.a].push(e.b);
                adj[e.b].push(e.a);
            }
        }
        let mut reach = vec![false; n];
        let mut queue: std::collections::VecDeque<usize> =
            grid.bumps.iter().map(|b| b.node).collect();
        for b in &grid.bumps {
            reach[b.node] = true;
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !reach[v] {
                    reach[v] = true;
                    queue.push_back(v);
                }
            }
        }
        for (i, r) in reach.iter().enumerate() {
            if !r {
                diags.push(format!("node {i} cannot reach any bump"));
            }
        }
    }
    diags
}

#[derive(Serialize, Deserialize)]
struct GridFile {
    format: String,
    version: u32,
    grid: PdnGrid,
}

/// Write a grid to its versioned JSON format (`.pdn.json`).
pub fn write_grid(path: &Path, grid: &PdnGrid) -> Result<()> {
    let file = GridFile {
        format: "pdn-grid".to_string(),
        version: GRID_FORMAT_VERSION,
        grid: grid.clone(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Format { path: path.display().to_string(), reason: e.to_string() })?;
    std::fs::write(path, json).map_err(|e| io_err(path, e))
}

/// Read a grid, rejecting unknown formats and newer major versions.
pub fn read_grid(path: &Path) -> Result<PdnGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: GridFile = serde_json::from_str(&text)
        .map_err(|e| Error::Format { path: path.display().to_string(), reason: e.to_string() })?;
    if file.format != "pdn-grid" {
        return Err(Error::Format {
            path: path.display().to_string(),
            reason: format!("unknown format tag {:?}", file.format),
        });
    }
    if file.version > GRID_FORMAT_VERSION {
        return Err(Error::Format {
            path: path.display().to_string(),
            reason: format!(
                "file version {} newer than supported {GRID_FORMAT_VERSION}",
                file.version
            ),
        });
    }
    Ok(file.grid)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn small_spec() -> GridSpec {
        GridSpec {
            die_w_um: 100.0,
            die_h_um: 100.0,
            pitch_um: 10.0,
            res_per_um: 0.1,
            cap_min_f: 1e-15,
            cap_max_f: 5e-15,
            bump_count: 4,
            bump_res_ohm: 0.5,
            bump_ind_h: None,
            load_count: 20,
            vdd_v: 1.0,
            seed: 7,
        }
    }

    #[test]
    fn smallest_mesh_counts() {
        let spec = GridSpec {
            die_w_um: 10.0,
            die_h_um: 10.0,
            pitch_um: 10.0,
            bump_count: 1,
            load_count: 1,
            ..small_spec()
        };
        let g = generate_grid(&spec).unwrap();
        assert_eq!(g.n_nodes(), 4); // 2×2 mesh
        assert_eq!(g.edges.len(), 4);
        assert!(validate_grid(&g).is_empty());
    }

    #[test]
    fn node_count_follows_pitch_arithmetic() {
        let spec = GridSpec {
            die_w_um: 240.0,
            die_h_um: 240.0,
            pitch_um: 10.0,
            bump_count: 16,
            load_count: 50,
            ..small_spec()
        };
        let g = generate_grid(&spec).unwrap();
        assert_eq!(g.n_nodes(), 625); // (240/10 + 1)²
        assert_eq!(g.bumps.len(), 16);
        assert!(validate_grid(&g).is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small_spec();
        let a = generate_grid(&spec).unwrap();
        let b = generate_grid(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_grid(&GridSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bumps_and_loads_are_distinct_and_disjoint() {
        let g = generate_grid(&small_spec()).unwrap();
        let bump_nodes: std::collections::HashSet<_> = g.bumps.iter().map(|b| b.node).collect();
        assert_eq!(bump_nodes.len(), g.bumps.len());
        let load_nodes: std::collections::HashSet<_> = g.loads.iter().copied().collect();
        assert_eq!(load_nodes.len(), g.loads.len());
        assert!(bump_nodes.is_disjoint(&load_nodes));
    }

    #[test]
    fn mesh_edge_conductance_from_per_um_resistance() {
        let g = generate_grid(&small_spec()).unwrap();
        // 0.1 Ω/µm × 10 µm pitch → 1 Ω per segment → 1 S
        for e in &g.edges {
            assert_eq!(e.g_s, 1.0);
        }
    }

    #[test]
    fn rejects_more_bumps_than_nodes() {
        let spec = GridSpec {
            die_w_um: 10.0,
            die_h_um: 10.0,
            pitch_um: 10.0,
            bump_count: 5,
            load_count: 1,
            ..small_spec()
        };
        assert!(matches!(generate_grid(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        let spec = GridSpec { res_per_um: 0.0, ..small_spec() };
        assert!(generate_grid(&spec).is_err());
        let spec = GridSpec { cap_min_f: -1.0, ..small_spec() };
        assert!(generate_grid(&spec).is_err());
    }

    #[test]
    fn validate_flags_isolated_node() {
        let mut g = generate_grid(&small_spec()).unwrap();
        // cut every edge touching node 0
        g.edges.retain(|e| e.a != 0 && e.b != 0);
        let diags = validate_grid(&g);
        assert!(diags.iter().any(|d| d.contains("node 0 cannot reach")), "{diags:?}");
    }

    #[test]
    fn validate_flags_zero_conductance() {
        let mut g = generate_grid(&small_spec()).unwrap();
        g.edges[3].g_s = 0.0;
        let diags = validate_grid(&g);
        assert!(diags.iter().any(|d| d.contains("not strictly positive")), "{diags:?}");
    }

    #[test]
    fn validate_flags_duplicate_bumps() {
        let mut g = generate_grid(&small_spec()).unwrap();
        let node = g.bumps[0].node;
        g.bumps.push(Bump { node, res_ohm: 1.0, ind_h: None });
        assert!(validate_grid(&g).iter().any(|d| d.contains("duplicate bump")));
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.pdn.json");
        let g = generate_grid(&small_spec()).unwrap();
        write_grid(&p, &g).unwrap();
        assert_eq!(read_grid(&p).unwrap(), g);
    }

    #[test]
    fn rejects_newer_major_version() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.pdn.json");
        let g = generate_grid(&small_spec()).unwrap();
        write_grid(&p, &g).unwrap();
        let text = std::fs::read_to_string(&p).unwrap().replace(
            "\"version\": 1",
            "\"version\": 99",
        );
        std::fs::write(&p, text).unwrap();
        assert!(matches!(read_grid(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn bump_lattice_spreads_over_die() {
        // 16 bumps on a 100×100 die: every quadrant must contain at least one.
        let g = generate_grid(&GridSpec { bump_count: 16, ..small_spec() }).unwrap();
        let mut quadrant = [false; 4];
        for b in &g.bumps {
            let (x, y) = g.nodes_um[b.node];
            let q = (x >= 50.0) as usize + 2 * ((y >= 50.0) as usize);
            quadrant[q] = true;
        }
        assert!(quadrant.iter().all(|&q| q), "{quadrant:?}");
    }
}
