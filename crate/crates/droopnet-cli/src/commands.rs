//! Subcommand implementations.
//!
//! Each command reads its inputs, does the work, and writes a run manifest
//! next to its outputs recording the resolved configuration hash, seed,
//! thread count, and wall time. Per-vector work (simulation, feature
//! extraction, prediction) fans out across the rayon pool; results are
//! assembled by index, so the outputs do not depend on the thread count.

use crate::artifacts::{self, RunManifest, VectorsManifest};
use clap::Args;
use droopnet::compress::temporal_compress;
use droopnet::dataset::{build_dataset, Dataset, DatasetSpec, Split};
use droopnet::error::{io_err, Error, Result};
use droopnet::eval::{
    accuracy_metrics, benchmark, hotspot_metrics, sweep_compression, sweep_plots,
    write_report_plots, write_sweep_csv, MetricsReport, Timing,
};
use droopnet::features::distance_tensor;
use droopnet::grid::{generate_grid, read_grid, write_grid, GridSpec, PdnGrid};
use droopnet::model::{load_model, save_model, Model, ModelConfig};
use droopnet::sim::{simulate_noise_maps_batch, CurrentTrace, NoiseMap};
use droopnet::system::{TransientSystem, SOLVE_LANES};
use droopnet::tiling::{build_tiling, tile_current_maps, TileCurrentMaps, Tiling};
use droopnet::train::{train, TrainParams};
use droopnet::vectors::{generate_trace, VectorSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

/// Build the global rayon pool and return the effective worker count.
pub fn init_threads(requested: Option<usize>) -> usize {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = requested {
        builder = builder.num_threads(n.max(1));
    }
    // Only the first global build can win; tests that call commands
    // repeatedly in-process fall back to the existing pool.
    let _ = builder.build_global();
    rayon::current_num_threads()
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
    }
    Ok(())
}

fn run_manifest<C: Serialize>(
    command: &str,
    config: &C,
    seed: Option<u64>,
    threads: usize,
    inputs: &[&Path],
    outputs: &[&Path],
    t0: Instant,
) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: artifacts::config_hash(config),
        seed,
        threads,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        wall_secs: t0.elapsed().as_secs_f64(),
    }
}

/// `--tiles 24x24` → columns × rows.
#[derive(Debug, Clone, Copy)]
pub struct Tiles {
    pub m: usize,
    pub n: usize,
}

fn parse_tiles(s: &str) -> std::result::Result<Tiles, String> {
    let (m, n) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected MxN (e.g. 24x24), got {s:?}"))?;
    let m: usize = m.trim().parse().map_err(|e| format!("tile columns: {e}"))?;
    let n: usize = n.trim().parse().map_err(|e| format!("tile rows: {e}"))?;
    Ok(Tiles { m, n })
}

/// `--tau auto` or an explicit threshold.
#[derive(Debug, Clone, Copy)]
pub struct TauArg(pub Option<f64>);

fn parse_tau(s: &str) -> std::result::Result<TauArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(TauArg(None));
    }
    let v: f64 = s.parse().map_err(|e| format!("expected 'auto' or a number: {e}"))?;
    Ok(TauArg(Some(v)))
}

/// Comma-separated compression rates.
#[derive(Debug, Clone)]
pub struct Rates(pub Vec<f64>);

fn parse_rates(s: &str) -> std::result::Result<Rates, String> {
    let rates: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("rate {p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if rates.is_empty() {
        return Err("need at least one rate".into());
    }
    Ok(Rates(rates))
}

/// Synthesize a power-grid design from a parameter file.
#[derive(Debug, Args)]
pub struct GenDesign {
    /// Grid synthesis parameters (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Output design file.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the seed in the spec file.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl GenDesign {
    pub fn run(&self, threads: usize) -> Result<()> {
        let t0 = Instant::now();
        let mut spec: GridSpec = read_json_file(&self.spec)?;
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        let grid = generate_grid(&spec)?;
        ensure_parent(&self.out)?;
        write_grid(&self.out, &grid)?;
        log::info!(
            "design: {} nodes, {} bumps, {} loads, vdd {} V",
            grid.n_nodes(),
            grid.bumps.len(),
            grid.loads.len(),
            grid.vdd_v
        );
        run_manifest("gen-design", &spec, self.seed, threads, &[&self.spec], &[&self.out], t0)
            .write_for_file(&self.out)
    }
}

/// Synthesize load-current test vectors for a design.
#[derive(Debug, Args)]
pub struct GenVectors {
    /// Design file from gen-design.
    #[arg(long)]
    pub design: PathBuf,
    /// Vector synthesis parameters (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Number of vectors to generate.
    #[arg(long)]
    pub count: usize,
    /// Output vector directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the seed in the spec file.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl GenVectors {
    pub fn run(&self, threads: usize) -> Result<()> {
        let t0 = Instant::now();
        let grid = read_grid(&self.design)?;
        let mut spec: VectorSpec = read_json_file(&self.spec)?;
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if self.count == 0 {
            return Err(Error::InvalidSpec("--count must be ≥ 1".into()));
        }
        std::fs::create_dir_all(&self.out).map_err(|e| io_err(&self.out, e))?;
        // Traces are independent draws indexed by vector number, so they can
        // be generated and written in any order.
        (0..self.count).into_par_iter().try_for_each(|i| {
            let trace = generate_trace(&spec, &grid, i)?;
            artifacts::write_trace(&self.out, i, &trace)
        })?;
        let manifest = VectorsManifest {
            format: artifacts::VECTORS_FORMAT.into(),
            version: artifacts::ARTIFACT_VERSION,
            count: self.count,
            n_stamps: spec.n_stamps,
            n_loads: grid.n_loads(),
            dt_s: spec.dt_s,
            spec: spec.clone(),
        };
        artifacts::write_vectors_manifest(&self.out, &manifest)?;
        log::info!(
            "wrote {} vectors ({} stamps × {} loads each)",
            self.count,
            spec.n_stamps,
            grid.n_loads()
        );
        run_manifest(
            "gen-vectors",
            &(&spec, self.count),
            self.seed,
            threads,
            &[&self.design, &self.spec],
            &[&self.out],
            t0,
        )
        .write(&self.out)
    }
}

fn check_loads(grid: &PdnGrid, vm: &VectorsManifest) -> Result<()> {
    if vm.n_loads != grid.n_loads() {
        return Err(Error::ShapeMismatch(format!(
            "vectors drive {} loads, design has {}",
            vm.n_loads,
            grid.n_loads()
        )));
    }
    Ok(())
}

/// Ground truth: transient-simulate every vector and reduce each to a
/// per-tile worst-case noise map.
#[derive(Debug, Args)]
pub struct Simulate {
    /// Design file from gen-design.
    #[arg(long)]
    pub design: PathBuf,
    /// Vector directory from gen-vectors.
    #[arg(long)]
    pub vectors: PathBuf,
    /// Tile grid, columns x rows (e.g. 24x24).
    #[arg(long, value_parser = parse_tiles)]
    pub tiles: Tiles,
    /// Output noise-map directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl Simulate {
    pub fn run(&self, threads: usize) -> Result<()> {
        let t0 = Instant::now();
        let grid = read_grid(&self.design)?;
        let vm = artifacts::read_vectors_manifest(&self.vectors)?;
        check_loads(&grid, &vm)?;
        let tiling = build_tiling(&grid, self.tiles.m, self.tiles.n)?;
        let mut sys = TransientSystem::stamp(&grid, vm.dt_s)?;
        sys.factor()?;
        log::info!(
            "factored {} nodes in {:.2}s; simulating {} vectors",
            grid.n_nodes(),
            t0.elapsed().as_secs_f64(),
            vm.count
        );
        let indices: Vec<usize> = (0..vm.count).collect();
        let done = AtomicUsize::new(0);
        let per_chunk: Vec<Vec<NoiseMap>> = indices
            .par_chunks(SOLVE_LANES)
            .map(|chunk| {
                let traces: Vec<CurrentTrace> = chunk
                    .iter()
                    .map(|&i| artifacts::read_trace(&self.vectors, &vm, i))
                    .collect::<Result<_>>()?;
                let refs: Vec<&CurrentTrace> = traces.iter().collect();
                let maps = simulate_noise_maps_batch(&sys, &grid, &refs, &tiling)?;
                let d = done.fetch_add(chunk.len(), Ordering::Relaxed) + chunk.len();
                if d % 64 == 0 || d == vm.count {
                    log::info!("simulated {d}/{} vectors", vm.count);
                }
                Ok(maps)
            })
            .collect::<Result<_>>()?;
        let maps: Vec<NoiseMap> = per_chunk.into_iter().flatten().collect();
        artifacts::write_maps(&self.out, self.tiles.m, self.tiles.n, grid.vdd_v, &maps)?;
        run_manifest(
            "simulate",
            &(self.tiles.m, self.tiles.n, vm.dt_s),
            None,
            threads,
            &[&self.design, &self.vectors],
            &[&self.out],
            t0,
        )
        .write(&self.out)
    }
}

/// Simulate a vector population and assemble the labeled training dataset
/// (compressed tile-current features, truth maps, expansion-based splits).
#[derive(Debug, Args)]
pub struct BuildDataset {
    /// Design file from gen-design.
    #[arg(long)]
    pub design: PathBuf,
    /// Vector synthesis parameters (JSON); vectors are drawn on the fly.
    #[arg(long)]
    pub vector_spec: PathBuf,
    /// Tile grid, columns x rows (e.g. 24x24).
    #[arg(long, value_parser = parse_tiles)]
    pub tiles: Tiles,
    /// Number of vectors to simulate.
    #[arg(long)]
    pub count: usize,
    /// Temporal compression rate in (0, 1].
    #[arg(long)]
    pub r: f64,
    /// Compression split step.
    #[arg(long, default_value_t = 0.1)]
    pub dr: f64,
    /// Expansion threshold: 'auto' searches for the value whose accepted
    /// fraction matches --train-fraction.
    #[arg(long, default_value = "auto", value_parser = parse_tau)]
    pub tau: TauArg,
    /// Target training fraction for the threshold search.
    #[arg(long, default_value_t = 0.6)]
    pub train_fraction: f64,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the vector seed and the split-shuffle seed together.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl BuildDataset {
    pub fn run(&self, threads: usize) -> Result<()> {
        let t0 = Instant::now();
        let grid = read_grid(&self.design)?;
        let mut vspec: VectorSpec = read_json_file(&self.vector_spec)?;
        if let Some(s) = self.seed {
            vspec.seed = s;
        }
        let spec = DatasetSpec {
            m: self.tiles.m,
            n: self.tiles.n,
            count: self.count,
            rate: self.r,
            dr: self.dr,
            train_fraction: self.train_fraction,
            tau: self.tau.0,
            seed: self.seed.unwrap_or(vspec.seed),
        };
        let ds = build_dataset(&grid, &vspec, &spec, |done, total| {
            if done % 20 == 0 || done == total {
                log::info!("labeled {done}/{total} vectors");
            }
        })?;
        ds.save(&self.out)?;
        let count_of = |s: Split| ds.splits.iter().filter(|&&x| x == s).count();
        log::info!(
            "dataset: τ = {:.6}, splits {}/{}/{} train/val/test",
            ds.tau,
            count_of(Split::Train),
            count_of(Split::Val),
            count_of(Split::Test)
        );
        run_manifest(
            "build-dataset",
            &(&vspec, &spec),
            self.seed,
            threads,
            &[&self.design, &self.vector_spec],
            &[&self.out],
            t0,
        )
        .write(&self.out)
    }
}

/// Optional architecture overrides for `train --config`; anything omitted
/// keeps the built-in default, and the map shape always comes from the
/// dataset.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelOverrides {
    c1: Option<usize>,
    c2: Option<usize>,
    c3: Option<usize>,
    depth: Option<usize>,
    kernel: Option<usize>,
    fusion_bypass: Option<bool>,
    seed: Option<u64>,
}

/// Train the predictor on a dataset and write a checkpoint.
#[derive(Debug, Args)]
pub struct Train {
    /// Dataset directory from build-dataset.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Architecture overrides (JSON, all fields optional).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output checkpoint directory (also receives the training report).
    #[arg(long)]
    pub out: PathBuf,
    /// Training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Minibatch size.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Early-stopping patience in epochs.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Start the output bias at zero instead of the mean training noise.
    #[arg(long)]
    pub cold_start: bool,
    /// Override the weight-init and shuffle seeds together.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Train {
    pub fn run(&self, threads: usize) -> Result<()> {
        let t0 = Instant::now();
        let ds = Dataset::load(&self.dataset)?;
        let overrides: ModelOverrides = match &self.config {
            Some(path) => read_json_file(path)?,
            None => ModelOverrides::default(),
        };
        let mut config = ModelConfig::new(ds.m, ds.n, ds.b, overrides.seed.unwrap_or(0));
        if let Some(v) = overrides.c1 {
            config.c1 = v;
        }
        if let Some(v) = overrides.c2 {
            config.c2 = v;
        }
        if let Some(v) = overrides.c3 {
            config.c3 = v;
        }
        if let Some(v) = overrides.depth {
            config.depth = v;
        }
        if let Some(v) = overrides.kernel {
            config.kernel = v;
        }
        if let Some(v) = overrides.fusion_bypass {
            config.fusion_bypass = v;
        }
        let mut params = TrainParams::default();
        if let Some(v) = self.epochs {
            params.epochs = v;
        }
        if let Some(v) = self.lr {
            params.lr = v;
        }
        if let Some(v) = self.batch {
            params.batch = v;
        }
        if let Some(v) = self.patience {
            params.patience = v;
        }
        params.warm_start_bias = !self.cold_start;
        if let Some(s) = self.seed {
            config.seed = s;
            params.seed = s;
        }
        let mut model = Model::new(config.clone(), ds.stats)?;
        let report = train(&mut model, &ds, &params)?;
        save_model(&model, &self.out)?;
        report.write_json(&self.out.join("train_report.json"))?;
        report.write_csv(&self.out.join("train_report.csv"))?;
        log::info!(
            "trained {} epochs; best val loss {:.6} V at epoch {}",
            report.epochs_run,
            report.best_val_loss_v(),
            report.best_epoch
        );
        let mut inputs: Vec<&Path> = vec![&self.dataset];
        if let Some(c) = &self.config {
            inputs.push(c);
        }
        run_manifest("train", &(&config, &params), self.seed, threads, &inputs, &[&self.out], t0)
            .write(&self.out)
    }
}

fn load_predictor(ckpt: &Path, design: &Path) -> Result<(Model, PdnGrid, Tiling, droopnet::nn::Tensor)> {
    let model = load_model(ckpt)?;
    let grid = read_grid(design)?;
    if grid.bumps.len() != model.config.b {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint expects {} bumps, design has {}",
            model.config.b,
            grid.bumps.len()
        )));
    }
    let tiling = build_tiling(&grid, model.config.m, model.config.n)?;
    let dist_norm = model.normalize_distance(&distance_tensor(&grid, &tiling))?;
    Ok((model, grid, tiling, dist_norm))
}

/// Predict worst-case noise maps for a vector set from a checkpoint.
#[derive(Debug, Args)]
pub struct Predict {
    /// Checkpoint directory from train.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Design file the vectors target.
    #[arg(long)]
    pub design: PathBuf,
    /// Vector directory from gen-vectors.
    #[arg(long)]
    pub vectors: PathBuf,
    /// Temporal compression rate in (0, 1].
    #[arg(long)]
    pub r: f64,
    /// Compression split step.
    #[arg(long, default_value_t = 0.1)]
    pub dr: f64,
    /// Output noise-map directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl Predict {
    pub fn run(&self, threads: usize) -> Result<()> {
        let t0 = Instant::now();
        let (model, grid, tiling, dist_norm) = load_predictor(&self.ckpt, &self.design)?;
        let vm = artifacts::read_vectors_manifest(&self.vectors)?;
        check_loads(&grid, &vm)?;
        let done = AtomicUsize::new(0);
        let maps: Vec<NoiseMap> = (0..vm.count)
            .into_par_iter()
            .map(|i| {
                let trace = artifacts::read_trace(&self.vectors, &vm, i)?;
                let raw = tile_current_maps(&trace, &tiling)?;
                let compressed = temporal_compress(&raw, self.r, self.dr)?;
                let map = model.predict(&dist_norm, &compressed.maps)?;
                let d = done.fetch_add(1, Ordering::Relaxed) + 1;
                if d % 64 == 0 || d == vm.count {
                    log::info!("predicted {d}/{} vectors", vm.count);
                }
                Ok(map)
            })
            .collect::<Result<_>>()?;
        artifacts::write_maps(&self.out, model.config.m, model.config.n, grid.vdd_v, &maps)?;
        run_manifest(
            "predict",
            &(&model.config, self.r, self.dr),
            None,
            threads,
            &[&self.ckpt, &self.design, &self.vectors],
            &[&self.out],
            t0,
        )
        .write(&self.out)
    }
}

/// Compare predicted noise maps against simulated truth and write a report.
#[derive(Debug, Args)]
pub struct Evaluate {
    /// Predicted noise-map directory.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth noise-map directory.
    #[arg(long)]
    pub truth: PathBuf,
    /// Hotspot budget as a fraction of the supply (tiles with truth noise
    /// at or above vspec × vdd count as hot).
    #[arg(long, default_value_t = 0.1)]
    pub vspec: f64,
    /// Output report (JSON).
    #[arg(long)]
    pub report: PathBuf,
    /// Also write the report as flat CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Also write diagnostic plots into this directory.
    #[arg(long)]
    pub plots: Option<PathBuf>,
    /// Benchmark: checkpoint to time (requires --design, --vectors, --r).
    #[arg(long, requires_all = ["design", "vectors", "r"])]
    pub ckpt: Option<PathBuf>,
    /// Benchmark: design file.
    #[arg(long, requires = "ckpt")]
    pub design: Option<PathBuf>,
    /// Benchmark: vector directory to time both pipelines on.
    #[arg(long, requires = "ckpt")]
    pub vectors: Option<PathBuf>,
    /// Benchmark: compression rate for the predictor side.
    #[arg(long, requires = "ckpt")]
    pub r: Option<f64>,
    /// Benchmark: compression split step.
    #[arg(long, default_value_t = 0.1)]
    pub dr: f64,
}

impl Evaluate {
    fn bench(&self, threads: usize) -> Result<Timing> {
        let (ckpt, design, vectors, r) = match (&self.ckpt, &self.design, &self.vectors, self.r)
        {
            (Some(c), Some(d), Some(v), Some(r)) => (c, d, v, r),
            _ => unreachable!("clap enforces the benchmark flag group"),
        };
        let (model, grid, tiling, dist_norm) = load_predictor(ckpt, design)?;
        let vm = artifacts::read_vectors_manifest(vectors)?;
        check_loads(&grid, &vm)?;
        let traces: Vec<CurrentTrace> = (0..vm.count)
            .map(|i| artifacts::read_trace(vectors, &vm, i))
            .collect::<Result<_>>()?;
        let mut sys = TransientSystem::stamp(&grid, vm.dt_s)?;
        sys.factor()?;
        let mut timing = benchmark(&model, &dist_norm, &sys, &grid, &tiling, &traces, r, self.dr)?;
        timing.threads = threads;
        Ok(timing)
    }

    pub fn run(&self, threads: usize) -> Result<()> {
        let t0 = Instant::now();
        if !(self.vspec > 0.0 && self.vspec < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "--vspec must be a supply fraction in (0, 1), got {}",
                self.vspec
            )));
        }
        let (pm, preds) = artifacts::read_maps(&self.pred)?;
        let (tm, truths) = artifacts::read_maps(&self.truth)?;
        if pm.m != tm.m || pm.n != tm.n || pm.count != tm.count {
            return Err(Error::ShapeMismatch(format!(
                "predictions are {} maps of {}×{}, truth is {} maps of {}×{}",
                pm.count, pm.m, pm.n, tm.count, tm.m, tm.n
            )));
        }
        if pm.vdd_v != tm.vdd_v {
            log::warn!(
                "prediction vdd {} V differs from truth vdd {} V; budget uses truth",
                pm.vdd_v,
                tm.vdd_v
            );
        }
        let accuracy = accuracy_metrics(&preds, &truths)?;
        let hotspot = hotspot_metrics(&preds, &truths, self.vspec * tm.vdd_v)?;
        let timing = if self.ckpt.is_some() { Some(self.bench(threads)?) } else { None };
        let report = MetricsReport { accuracy, hotspot, timing };
        report.validate()?;
        ensure_parent(&self.report)?;
        report.write_json(&self.report)?;
        if let Some(csv) = &self.csv {
            ensure_parent(csv)?;
            report.write_csv(csv)?;
        }
        if let Some(plots) = &self.plots {
            write_report_plots(plots, &preds, &truths)?;
        }
        log::info!(
            "mean AE {:.4} V, mean RE {:.4}, missing rate {:?}, AUC {:?}",
            report.accuracy.mean_ae_v,
            report.accuracy.mean_re,
            report.hotspot.missing_rate,
            report.hotspot.auc
        );
        if let Some(t) = &report.timing {
            log::info!(
                "oracle {:.4} s/vector, predictor {:.4} s/vector, speedup {:.1}×",
                t.oracle_secs_per_vector,
                t.predict_secs_per_vector,
                t.speedup
            );
        }
        run_manifest(
            "evaluate",
            &(self.vspec, self.r, self.dr),
            None,
            threads,
            &[&self.pred, &self.truth],
            &[&self.report],
            t0,
        )
        .write_for_file(&self.report)
    }
}

/// Re-run inference at several compression rates against fixed truth and
/// tabulate accuracy and cost per rate.
#[derive(Debug, Args)]
pub struct SweepCompression {
    /// Checkpoint directory from train.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Design file the vectors target.
    #[arg(long)]
    pub design: PathBuf,
    /// Vector directory from gen-vectors.
    #[arg(long)]
    pub vectors: PathBuf,
    /// Ground-truth noise-map directory for the same vectors.
    #[arg(long)]
    pub truth: PathBuf,
    /// Comma-separated compression rates to test.
    #[arg(long = "r-list", value_parser = parse_rates,
          default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub r_list: Rates,
    /// Compression split step.
    #[arg(long, default_value_t = 0.1)]
    pub dr: f64,
    /// Output table (CSV).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write rate-vs-error and rate-vs-runtime plots here.
    #[arg(long)]
    pub plots: Option<PathBuf>,
}

impl SweepCompression {
    pub fn run(&self, threads: usize) -> Result<()> {
        let t0 = Instant::now();
        let (model, grid, tiling, dist_norm) = load_predictor(&self.ckpt, &self.design)?;
        let vm = artifacts::read_vectors_manifest(&self.vectors)?;
        check_loads(&grid, &vm)?;
        let (tm, truths) = artifacts::read_maps(&self.truth)?;
        if tm.count != vm.count || tm.m != model.config.m || tm.n != model.config.n {
            return Err(Error::ShapeMismatch(format!(
                "truth is {} maps of {}×{}, expected {} of {}×{}",
                tm.count, tm.m, tm.n, vm.count, model.config.m, model.config.n
            )));
        }
        let maps: Vec<TileCurrentMaps> = (0..vm.count)
            .into_par_iter()
            .map(|i| {
                let trace = artifacts::read_trace(&self.vectors, &vm, i)?;
                tile_current_maps(&trace, &tiling)
            })
            .collect::<Result<_>>()?;
        let rows = sweep_compression(&model, &dist_norm, &maps, &truths, &self.r_list.0, self.dr)?;
        ensure_parent(&self.out)?;
        write_sweep_csv(&rows, &self.out)?;
        for row in &rows {
            log::info!(
                "r = {:.2}: mean RE {:.4}, mean AE {:.4} V, {:.4} s/vector",
                row.rate,
                row.mean_re,
                row.mean_ae_v,
                row.predict_secs_per_vector
            );
        }
        if let Some(dir) = &self.plots {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            let (re_svg, rt_svg) = sweep_plots(&rows);
            let re_path = dir.join("rate_vs_error.svg");
            std::fs::write(&re_path, re_svg).map_err(|e| io_err(&re_path, e))?;
            let rt_path = dir.join("rate_vs_runtime.svg");
            std::fs::write(&rt_path, rt_svg).map_err(|e| io_err(&rt_path, e))?;
        }
        run_manifest(
            "sweep-compression",
            &(&self.r_list.0, self.dr),
            None,
            threads,
            &[&self.ckpt, &self.design, &self.vectors, &self.truth],
            &[&self.out],
            t0,
        )
        .write_for_file(&self.out)
    }
}
