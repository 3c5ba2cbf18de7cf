//! On-disk artifact formats the commands exchange: vector directories, noise
//! map directories, and per-run manifests.
//!
//! Every directory carries a JSON manifest with a format tag and version;
//! readers reject unknown tags and newer versions. Bulk numbers live in
//! binary tensor files next to the manifest. Traces are written one file per
//! vector so consumers can stream them instead of holding a whole vector set
//! in memory.

use droopnet::error::{io_err, Error, Result};
use droopnet::sim::{CurrentTrace, NoiseMap};
use droopnet::tns::{decode, encode, Tns, TnsData};
use droopnet::vectors::VectorSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const VECTORS_FORMAT: &str = "droopnet-vectors";
pub const MAPS_FORMAT: &str = "droopnet-noise-maps";
pub const ARTIFACT_VERSION: u32 = 1;
pub const VECTORS_MANIFEST: &str = "vectors.json";
pub const MAPS_MANIFEST: &str = "maps.json";
pub const MAPS_FILE: &str = "maps.tns";
pub const RUN_MANIFEST: &str = "run_manifest.json";

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn check_format(path: &Path, format: &str, expected: &str, version: u32) -> Result<()> {
    if format != expected {
        return Err(Error::Format {
            path: path.display().to_string(),
            reason: format!("format {format:?}, expected {expected:?}"),
        });
    }
    if version > ARTIFACT_VERSION {
        return Err(Error::Format {
            path: path.display().to_string(),
            reason: format!("version {version} is newer than supported {ARTIFACT_VERSION}"),
        });
    }
    Ok(())
}

/// Index of a vector directory: `vectors.json` plus `trace_NNNN.tns` files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorsManifest {
    pub format: String,
    pub version: u32,
    pub count: usize,
    pub n_stamps: usize,
    pub n_loads: usize,
    pub dt_s: f64,
    /// Generator parameters the traces were drawn from.
    pub spec: VectorSpec,
}

pub fn trace_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("trace_{index:04}.tns"))
}

/// Write one trace file, dims `[n_stamps, n_loads]`.
pub fn write_trace(dir: &Path, index: usize, trace: &CurrentTrace) -> Result<()> {
    let t = Tns {
        dims: vec![trace.n_stamps(), trace.n_loads],
        data: TnsData::F64(trace.currents_a.clone()),
    };
    let path = trace_path(dir, index);
    std::fs::write(&path, encode(&t)).map_err(|e| io_err(&path, e))
}

pub fn write_vectors_manifest(dir: &Path, manifest: &VectorsManifest) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_json(&dir.join(VECTORS_MANIFEST), manifest)
}

pub fn read_vectors_manifest(dir: &Path) -> Result<VectorsManifest> {
    let path = dir.join(VECTORS_MANIFEST);
    let m: VectorsManifest = read_json(&path)?;
    check_format(&path, &m.format, VECTORS_FORMAT, m.version)?;
    Ok(m)
}

/// Load one trace by index; shape-checked against the manifest.
pub fn read_trace(dir: &Path, manifest: &VectorsManifest, index: usize) -> Result<CurrentTrace> {
    let path = trace_path(dir, index);
    let bytes = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
    let t = decode(&bytes, &path.display().to_string())?;
    if t.dims != [manifest.n_stamps, manifest.n_loads] {
        return Err(Error::Format {
            path: path.display().to_string(),
            reason: format!(
                "trace dims {:?}, manifest says [{}, {}]",
                t.dims, manifest.n_stamps, manifest.n_loads
            ),
        });
    }
    let TnsData::F64(currents_a) = t.data else {
        return Err(Error::Format {
            path: path.display().to_string(),
            reason: "traces must be f64".into(),
        });
    };
    Ok(CurrentTrace { dt_s: manifest.dt_s, n_loads: manifest.n_loads, currents_a })
}

/// Index of a noise-map directory: `maps.json` plus one `maps.tns` holding
/// all maps as `[count, n, m]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapsManifest {
    pub format: String,
    pub version: u32,
    pub count: usize,
    /// Tile columns.
    pub m: usize,
    /// Tile rows.
    pub n: usize,
    /// Supply the maps were computed against, for budget thresholds.
    pub vdd_v: f64,
}

pub fn write_maps(dir: &Path, m: usize, n: usize, vdd_v: f64, maps: &[NoiseMap]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut flat = Vec::with_capacity(maps.len() * m * n);
    for map in maps {
        if map.m != m || map.n != n {
            return Err(Error::ShapeMismatch(format!(
                "map is {}×{} tiles, directory is {}×{}",
                map.m, map.n, m, n
            )));
        }
        flat.extend_from_slice(&map.values_v);
    }
    let t = Tns { dims: vec![maps.len(), n, m], data: TnsData::F64(flat) };
    let path = dir.join(MAPS_FILE);
    std::fs::write(&path, encode(&t)).map_err(|e| io_err(&path, e))?;
    let manifest = MapsManifest {
        format: MAPS_FORMAT.into(),
        version: ARTIFACT_VERSION,
        count: maps.len(),
        m,
        n,
        vdd_v,
    };
    write_json(&dir.join(MAPS_MANIFEST), &manifest)
}

pub fn read_maps(dir: &Path) -> Result<(MapsManifest, Vec<NoiseMap>)> {
    let mpath = dir.join(MAPS_MANIFEST);
    let manifest: MapsManifest = read_json(&mpath)?;
    check_format(&mpath, &manifest.format, MAPS_FORMAT, manifest.version)?;
    let path = dir.join(MAPS_FILE);
    let bytes = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
    let t = decode(&bytes, &path.display().to_string())?;
    if t.dims != [manifest.count, manifest.n, manifest.m] {
        return Err(Error::Format {
            path: path.display().to_string(),
            reason: format!(
                "maps dims {:?}, manifest says [{}, {}, {}]",
                t.dims, manifest.count, manifest.n, manifest.m
            ),
        });
    }
    let TnsData::F64(flat) = t.data else {
        return Err(Error::Format {
            path: path.display().to_string(),
            reason: "noise maps must be f64".into(),
        });
    };
    let sz = manifest.m * manifest.n;
    let maps = flat
        .chunks_exact(sz)
        .map(|c| NoiseMap { m: manifest.m, n: manifest.n, values_v: c.to_vec() })
        .collect();
    Ok((manifest, maps))
}

/// Record of one command invocation, written next to the outputs.
///
/// Wall clock (and nothing else here) varies between identical reruns, so
/// reproducibility comparisons skip this file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// SHA-256 of the resolved configuration JSON.
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub threads: usize,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_secs: f64,
}

/// Hash the resolved configuration of a command.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    let mut h = Sha256::new();
    h.update(json.as_bytes());
    format!("{:x}", h.finalize())
}

impl RunManifest {
    /// Write into an output directory as `run_manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        write_json(&dir.join(RUN_MANIFEST), self)
    }

    /// Write next to a single-file output as `<file>.run.json`, so commands
    /// whose outputs share a directory do not clobber each other's record.
    pub fn write_for_file(&self, out: &Path) -> Result<()> {
        let mut name = out.as_os_str().to_owned();
        name.push(".run.json");
        write_json(Path::new(&name), self)
    }
}
