//! Model checkpointing: a JSON manifest (config, normalization scales,
//! parameter layout) next to one binary tensor blob holding every parameter
//! in canonical order. Round trips are bit-exact.

use super::config::ModelConfig;
use super::predictor::Model;
use crate::error::{io_err, Error, Result};
use crate::features::FeatureStats;
use crate::tns;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

const FORMAT: &str = "droopnet-checkpoint";
const VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.json";
const WEIGHTS_FILE: &str = "weights.tns";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    config: ModelConfig,
    stats: FeatureStats,
    /// Length of each parameter tensor in canonical order.
    param_lengths: Vec<usize>,
    weights_file: String,
}

pub fn save_model(model: &Model, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let tensors = model.param_tensors();
    let param_lengths: Vec<usize> = tensors.iter().map(|t| t.len()).collect();
    let total: usize = param_lengths.iter().sum();
    let mut flat = Vec::with_capacity(total);
    for t in &tensors {
        flat.extend_from_slice(t);
    }
    tns::write_file(&dir.join(WEIGHTS_FILE), &tns::Tns::f64(vec![total], flat)?)?;
    let manifest = Manifest {
        format: FORMAT.to_string(),
        version: VERSION,
        config: model.config.clone(),
        stats: model.stats,
        param_lengths,
        weights_file: WEIGHTS_FILE.to_string(),
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Format { path: path.display().to_string(), reason: e.to_string() })?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(())
}

pub fn load_model(dir: &Path) -> Result<Model> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Format { path: path.display().to_string(), reason: e.to_string() })?;
    if manifest.format != FORMAT {
        return Err(Error::Format {
            path: path.display().to_string(),
            reason: format!("unknown format tag {:?}", manifest.format),
        });
    }
    if manifest.version > VERSION {
        return Err(Error::Format {
            path: path.display().to_string(),
            reason: format!(
                "checkpoint version {} is newer than supported {VERSION}",
                manifest.version
            ),
        });
    }
    let weights_path = dir.join(&manifest.weights_file);
    let blob = tns::read_file(&weights_path)?;
    let flat = match blob.data {
        tns::TnsData::F64(v) => v,
        tns::TnsData::F32(_) => {
            return Err(Error::Format {
                path: weights_path.display().to_string(),
                reason: "checkpoint weights must be f64".into(),
            })
        }
    };
    let mut model = Model::new(manifest.config, manifest.stats)?;
    let mut tensors = model.param_tensors_mut();
    if tensors.len() != manifest.param_lengths.len() {
        return Err(Error::ShapeMismatch(format!(
            "manifest lists {} parameter tensors, model has {}",
            manifest.param_lengths.len(),
            tensors.len()
        )));
    }
    let expected: usize = manifest.param_lengths.iter().sum();
    if flat.len() != expected {
        return Err(Error::ShapeMismatch(format!(
            "weight blob holds {} values, manifest expects {expected}",
            flat.len()
        )));
    }
    let mut off = 0;
    for (t, &len) in tensors.iter_mut().zip(&manifest.param_lengths) {
        if t.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "parameter tensor length {} does not match manifest {len}",
                t.len()
            )));
        }
        t.copy_from_slice(&flat[off..off + len]);
        off += len;
    }
    drop(tensors);
    Ok(model)
}
