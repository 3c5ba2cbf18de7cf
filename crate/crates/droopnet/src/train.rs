//! Adam training loop with L1 loss in volts, best-validation checkpointing,
//! and early stopping.
//!
//! The per-sample loss is `Σ_tiles |v − v̂|` (volts); batches average it.
//! Every epoch reshuffles the training ids with a per-epoch RNG stream, but
//! each batch accumulates sample gradients in ascending id order, so results
//! are bit-reproducible per seed regardless of shuffle implementation
//! details.

use crate::dataset::{Dataset, Split};
use crate::error::{io_err, Error, Result};
use crate::model::Model;
use crate::nn::{l1_loss, Adam, Tensor};
use crate::rng::{purpose, stream};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    /// Initialize the output bias to the normalized mean training truth so
    /// the first epochs correct shape instead of overall level.
    #[serde(default = "default_true")]
    pub warm_start_bias: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_epochs() -> usize {
    500
}
fn default_lr() -> f64 {
    1e-4
}
fn default_batch() -> usize {
    4
}
fn default_patience() -> usize {
    100
}
fn default_true() -> bool {
    true
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            epochs: default_epochs(),
            lr: default_lr(),
            batch: default_batch(),
            patience: default_patience(),
            warm_start_bias: true,
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::Invalid("epochs and batch must be ≥ 1".into()));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::Invalid(format!("lr must be finite and ≥ 0, got {}", self.lr)));
        }
        Ok(())
    }
}

/// Loss history and selection outcome. `wall_secs` is measurement-only and
/// never serialized, keeping written reports byte-stable across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean over train samples of the tile-summed L1 loss (volts), per epoch.
    pub train_loss_v: Vec<f64>,
    /// Same statistic over the validation split, per epoch.
    pub val_loss_v: Vec<f64>,
    /// Epoch whose weights the returned model carries.
    pub best_epoch: usize,
    pub epochs_run: usize,
    #[serde(skip)]
    pub wall_secs: f64,
}

impl TrainReport {
    pub fn best_val_loss_v(&self) -> f64 {
        self.val_loss_v[self.best_epoch]
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Format {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        text.push('\n');
        fs::write(path, text).map_err(|e| io_err(path, e))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("epoch,train_loss_v,val_loss_v\n");
        for (e, (t, v)) in self.train_loss_v.iter().zip(&self.val_loss_v).enumerate() {
            out.push_str(&format!("{e},{t},{v}\n"));
        }
        fs::write(path, out).map_err(|e| io_err(path, e))
    }
}

/// Per-sample loss `Σ_tiles |v − v̂|` in volts and its gradient.
fn sample_loss(pred: &Tensor, truth_v: &[f64]) -> (f64, Tensor) {
    let (loss, grad) = l1_loss(&pred.data, truth_v);
    (loss, Tensor { c: 1, h: pred.h, w: pred.w, lanes: 1, data: grad })
}

/// Train `model` on `ds`'s train split, validating on the val split each
/// epoch. The model is left holding the best-validation weights.
pub fn train(model: &mut Model, ds: &Dataset, params: &TrainParams) -> Result<TrainReport> {
    params.validate()?;
    ds.validate()?;
    if model.config.m != ds.m || model.config.n != ds.n || model.config.b != ds.b {
        return Err(Error::ShapeMismatch(format!(
            "model is {}×{} tiles, {} bump channels; dataset is {}×{}, {}",
            model.config.m, model.config.n, model.config.b, ds.m, ds.n, ds.b
        )));
    }
    if model.stats != ds.stats {
        return Err(Error::Invalid(
            "model normalization scales differ from the dataset's".into(),
        ));
    }
    let train_ids = ds.ids(Split::Train);
    let val_ids = ds.ids(Split::Val);
    if train_ids.is_empty() || val_ids.is_empty() {
        return Err(Error::Invalid(format!(
            "need non-empty train and val splits, got {} / {}",
            train_ids.len(),
            val_ids.len()
        )));
    }
    let started = Instant::now();
    let dist_norm = model.normalize_distance(&ds.distances)?;
    if params.warm_start_bias {
        let mut sum = 0.0;
        let mut count = 0usize;
        for &i in &train_ids {
            sum += ds.samples[i].truth.values_v.iter().sum::<f64>();
            count += ds.samples[i].truth.values_v.len();
        }
        model.set_output_bias(model.stats.normalize_noise(sum / count as f64));
    }
    let mut adam = Adam::new(params.lr);
    let mut report = TrainReport {
        train_loss_v: Vec::with_capacity(params.epochs),
        val_loss_v: Vec::with_capacity(params.epochs),
        best_epoch: 0,
        epochs_run: 0,
        wall_secs: 0.0,
    };
    let mut best_val = f64::INFINITY;
    let mut best_params: Vec<f64> = Vec::new();
    let mut since_best = 0usize;
    for epoch in 0..params.epochs {
        let mut order = train_ids.clone();
        order.shuffle(&mut stream(params.seed, purpose::EPOCH_SHUFFLE, epoch as u64));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(params.batch) {
            let mut ids = batch.to_vec();
            ids.sort_unstable();
            let mut acc: Option<crate::model::ModelGrads> = None;
            for &i in &ids {
                let s = &ds.samples[i];
                let maps = model.normalize_maps_f32(&s.maps_f32, s.k)?;
                let (pred, tape) = model.forward(&dist_norm, &maps);
                let (loss, g) = sample_loss(&pred, &s.truth.values_v);
                epoch_loss += loss;
                let grads = model.backward(&tape, &g);
                match &mut acc {
                    Some(a) => a.add(&grads),
                    None => acc = Some(grads),
                }
            }
            let mut grads = acc.expect("non-empty batch");
            grads.scale(1.0 / ids.len() as f64);
            let grad_tensors = grads.tensors();
            let grad_slices: Vec<&[f64]> = grad_tensors.iter().map(|v| v.as_slice()).collect();
            let mut params_mut = model.param_tensors_mut();
            let mut param_slices: Vec<&mut [f64]> =
                params_mut.iter_mut().map(|v| v.as_mut_slice()).collect();
            adam.step(&mut param_slices, &grad_slices);
            // A weight whose square would overflow f64 can only come from a
            // runaway step size; stop here rather than let the next forward
            // pass produce infinities.
            let guard = f64::MAX.sqrt();
            for t in &param_slices {
                if let Some(bad) = t.iter().find(|v| !v.is_finite() || v.abs() > guard) {
                    return Err(Error::Diverged(format!(
                        "epoch {epoch}: weight reached {bad} after an optimizer step"
                    )));
                }
            }
        }
        let train_loss = epoch_loss / train_ids.len() as f64;
        let val_loss = eval_split(model, ds, &dist_norm, &val_ids)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Diverged(format!(
                "epoch {epoch}: train loss {train_loss}, val loss {val_loss}"
            )));
        }
        report.train_loss_v.push(train_loss);
        report.val_loss_v.push(val_loss);
        report.epochs_run = epoch + 1;
        if val_loss < best_val {
            best_val = val_loss;
            report.best_epoch = epoch;
            best_params = flatten_params(model);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= params.patience {
                break;
            }
        }
    }
    restore_params(model, &best_params);
    report.wall_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Mean tile-summed L1 loss (volts) of `model` over the given sample ids.
pub fn eval_split(
    model: &Model,
    ds: &Dataset,
    dist_norm: &Tensor,
    ids: &[usize],
) -> Result<f64> {
    assert!(!ids.is_empty());
    let mut total = 0.0;
    for &i in ids {
        let s = &ds.samples[i];
        let maps = model.normalize_maps_f32(&s.maps_f32, s.k)?;
        let (pred, _) = model.forward(dist_norm, &maps);
        total += l1_loss(&pred.data, &s.truth.values_v).0;
    }
    Ok(total / ids.len() as f64)
}

fn flatten_params(model: &Model) -> Vec<f64> {
    let tensors = model.param_tensors();
    let mut flat = Vec::with_capacity(tensors.iter().map(|t| t.len()).sum());
    for t in tensors {
        flat.extend_from_slice(t);
    }
    flat
}

fn restore_params(model: &mut Model, flat: &[f64]) {
    let mut off = 0;
    for t in model.param_tensors_mut() {
        let len = t.len();
        t.copy_from_slice(&flat[off..off + len]);
        off += len;
    }
    assert_eq!(off, flat.len(), "parameter count drifted");
}
