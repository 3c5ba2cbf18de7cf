//! End-to-end tests that drive the compiled `droopnet` binary through the
//! whole pipeline on a small design, plus determinism and error-reporting
//! checks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const GRID_SPEC: &str = r#"{
  "die_w_um": 120.0,
  "die_h_um": 120.0,
  "pitch_um": 12.0,
  "res_per_um": 0.08,
  "cap_min_f": 1.0e-15,
  "cap_max_f": 3.0e-15,
  "bump_count": 3,
  "bump_res_ohm": 0.5,
  "bump_ind_h": 1.0e-11,
  "load_count": 10,
  "vdd_v": 1.0,
  "seed": 11
}"#;

const VECTOR_SPEC: &str = r#"{
  "n_stamps": 64,
  "dt_s": 1.0e-12,
  "idle_len": [4, 10],
  "burst_len": [4, 12],
  "amp_a": [0.002, 0.03],
  "ramp_stamps": 2,
  "seed": 9
}"#;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_droopnet")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(bin())
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("failed to spawn droopnet");
    assert!(
        out.status.success(),
        "droopnet {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_expect_failure(dir: &Path, args: &[&str]) -> serde_json::Value {
    let out = Command::new(bin())
        .current_dir(dir)
        .env("RUST_LOG", "off")
        .args(args)
        .output()
        .expect("failed to spawn droopnet");
    assert!(!out.status.success(), "droopnet {args:?} unexpectedly succeeded");
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(line)
        .unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {stderr}"))
}

fn write_specs(dir: &Path) {
    std::fs::write(dir.join("grid.json"), GRID_SPEC).unwrap();
    std::fs::write(dir.join("vectors.json"), VECTOR_SPEC).unwrap();
}

/// Run the whole flow with fixed seeds; leaves the standard artifact layout
/// behind in `dir`.
fn pipeline(dir: &Path) {
    write_specs(dir);
    run(dir, &["gen-design", "--spec", "grid.json", "--out", "design.pdn.json"]);
    run(
        dir,
        &[
            "gen-vectors",
            "--design",
            "design.pdn.json",
            "--spec",
            "vectors.json",
            "--count",
            "12",
            "--out",
            "vectors",
            "--seed",
            "5",
        ],
    );
    run(
        dir,
        &[
            "simulate",
            "--design",
            "design.pdn.json",
            "--vectors",
            "vectors",
            "--tiles",
            "4x4",
            "--out",
            "truth",
        ],
    );
    run(
        dir,
        &[
            "build-dataset",
            "--design",
            "design.pdn.json",
            "--vector-spec",
            "vectors.json",
            "--tiles",
            "4x4",
            "--count",
            "16",
            "--r",
            "0.3",
            "--out",
            "dataset",
            "--seed",
            "7",
        ],
    );
    run(
        dir,
        &[
            "train",
            "--dataset",
            "dataset",
            "--out",
            "ckpt",
            "--epochs",
            "25",
            "--lr",
            "1e-3",
            "--seed",
            "3",
        ],
    );
    run(
        dir,
        &[
            "predict",
            "--ckpt",
            "ckpt",
            "--design",
            "design.pdn.json",
            "--vectors",
            "vectors",
            "--r",
            "0.3",
            "--out",
            "pred",
        ],
    );
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}

/// All files under `dir` keyed by relative path, skipping run manifests
/// (they record wall time and legitimately differ between reruns).
fn collect_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
                continue;
            }
            let name = path.file_name().unwrap().to_string_lossy();
            if name == "run_manifest.json" || name.ends_with(".run.json") {
                continue;
            }
            let rel = path.strip_prefix(root).unwrap().to_path_buf();
            out.insert(rel, std::fs::read(&path).unwrap());
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn full_pipeline_produces_a_valid_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    pipeline(dir);
    run(
        dir,
        &[
            "evaluate",
            "--pred",
            "pred",
            "--truth",
            "truth",
            "--vspec",
            "0.1",
            "--report",
            "report.json",
            "--csv",
            "report.csv",
            "--plots",
            "plots",
            "--ckpt",
            "ckpt",
            "--design",
            "design.pdn.json",
            "--vectors",
            "vectors",
            "--r",
            "0.3",
            "--threads",
            "1",
        ],
    );
    run(
        dir,
        &[
            "sweep-compression",
            "--ckpt",
            "ckpt",
            "--design",
            "design.pdn.json",
            "--vectors",
            "vectors",
            "--truth",
            "truth",
            "--r-list",
            "0.2,0.5,0.9",
            "--out",
            "sweep.csv",
            "--plots",
            "sweep_plots",
        ],
    );

    let report = read_json(&dir.join("report.json"));
    let acc = &report["accuracy"];
    for key in ["mean_ae_v", "p99_ae_v", "max_ae_v", "mean_re", "p99_re", "max_re"] {
        let v = acc[key].as_f64().unwrap_or_else(|| panic!("accuracy.{key} missing"));
        assert!(v.is_finite() && v >= 0.0, "accuracy.{key} = {v}");
    }
    let hs = &report["hotspot"];
    let tiles: u64 = ["true_positives", "false_negatives", "false_positives", "true_negatives"]
        .iter()
        .map(|k| hs[k].as_u64().unwrap())
        .sum();
    assert_eq!(tiles, 12 * 4 * 4, "confusion counts must cover every tile of every map");
    let timing = &report["timing"];
    assert_eq!(timing["threads"].as_u64(), Some(1));
    assert!(timing["speedup"].as_f64().unwrap() > 0.0);

    // The flat CSV mirrors the JSON: header plus one line per metric.
    let csv = std::fs::read_to_string(dir.join("report.csv")).unwrap();
    assert!(csv.starts_with("metric,value\n"));
    assert!(csv.lines().count() > 10);

    for plot in ["truth.svg", "predicted.svg", "re_map.svg", "re_hist.svg"] {
        assert!(dir.join("plots").join(plot).is_file(), "missing plot {plot}");
    }

    let sweep = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 4, "header plus one row per rate");
    assert!(sweep.starts_with("rate,mean_re,mean_ae_v,predict_secs_per_vector\n"));
    assert!(dir.join("sweep_plots/rate_vs_error.svg").is_file());
    assert!(dir.join("sweep_plots/rate_vs_runtime.svg").is_file());

    // Every command leaves a run manifest recording its configuration.
    for manifest in [
        "design.pdn.json.run.json",
        "vectors/run_manifest.json",
        "truth/run_manifest.json",
        "dataset/run_manifest.json",
        "ckpt/run_manifest.json",
        "pred/run_manifest.json",
        "report.json.run.json",
        "sweep.csv.run.json",
    ] {
        let m = read_json(&dir.join(manifest));
        assert!(m["threads"].as_u64().unwrap() >= 1, "{manifest}");
        assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64, "{manifest}");
    }
}

#[test]
fn truth_compared_to_itself_reports_zero_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_specs(dir);
    run(dir, &["gen-design", "--spec", "grid.json", "--out", "design.pdn.json"]);
    run(
        dir,
        &[
            "gen-vectors",
            "--design",
            "design.pdn.json",
            "--spec",
            "vectors.json",
            "--count",
            "6",
            "--out",
            "vectors",
        ],
    );
    run(
        dir,
        &[
            "simulate",
            "--design",
            "design.pdn.json",
            "--vectors",
            "vectors",
            "--tiles",
            "4x4",
            "--out",
            "truth",
        ],
    );
    run(
        dir,
        &["evaluate", "--pred", "truth", "--truth", "truth", "--report", "report.json"],
    );
    let report = read_json(&dir.join("report.json"));
    assert_eq!(report["accuracy"]["mean_ae_v"].as_f64(), Some(0.0));
    assert_eq!(report["accuracy"]["max_re"].as_f64(), Some(0.0));
    assert_eq!(report["hotspot"]["false_positives"].as_u64(), Some(0));
    assert_eq!(report["hotspot"]["false_negatives"].as_u64(), Some(0));
    assert!(report["timing"].is_null(), "no benchmark was requested");
}

#[test]
fn reruns_write_byte_identical_artifacts() {
    let tmp_a = tempfile::tempdir().unwrap();
    let tmp_b = tempfile::tempdir().unwrap();
    pipeline(tmp_a.path());
    pipeline(tmp_b.path());
    let a = collect_files(tmp_a.path());
    let b = collect_files(tmp_b.path());
    let names_a: Vec<_> = a.keys().collect();
    let names_b: Vec<_> = b.keys().collect();
    assert_eq!(names_a, names_b, "reruns must produce the same file set");
    for (path, bytes) in &a {
        assert_eq!(bytes, &b[path], "{} differs between identical reruns", path.display());
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_specs(dir);
    run(dir, &["gen-design", "--spec", "grid.json", "--out", "design.pdn.json"]);
    for (vdir, threads) in [("vec1", "1"), ("vec2", "2")] {
        run(
            dir,
            &[
                "gen-vectors",
                "--design",
                "design.pdn.json",
                "--spec",
                "vectors.json",
                "--count",
                "10",
                "--out",
                vdir,
                "--threads",
                threads,
            ],
        );
    }
    for i in 0..10 {
        let name = format!("trace_{i:04}.tns");
        assert_eq!(
            std::fs::read(dir.join("vec1").join(&name)).unwrap(),
            std::fs::read(dir.join("vec2").join(&name)).unwrap(),
            "{name} depends on the thread count"
        );
    }
    for (mdir, threads) in [("truth1", "1"), ("truth2", "2")] {
        run(
            dir,
            &[
                "simulate",
                "--design",
                "design.pdn.json",
                "--vectors",
                "vec1",
                "--tiles",
                "4x4",
                "--out",
                mdir,
                "--threads",
                threads,
            ],
        );
    }
    assert_eq!(
        std::fs::read(dir.join("truth1/maps.tns")).unwrap(),
        std::fs::read(dir.join("truth2/maps.tns")).unwrap(),
        "simulation output depends on the thread count"
    );
}

#[test]
fn failures_emit_machine_readable_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    // Missing input directory.
    let err = run_expect_failure(
        dir,
        &["evaluate", "--pred", "nope", "--truth", "nope", "--report", "r.json"],
    );
    assert_eq!(err["error"].as_str(), Some("io"));
    assert!(err["message"].as_str().unwrap().contains("nope"));

    // Structurally valid JSON that fails validation.
    std::fs::write(
        dir.join("bad_grid.json"),
        GRID_SPEC.replace("\"pitch_um\": 12.0", "\"pitch_um\": 0.0"),
    )
    .unwrap();
    let err = run_expect_failure(
        dir,
        &["gen-design", "--spec", "bad_grid.json", "--out", "design.pdn.json"],
    );
    assert_eq!(err["error"].as_str(), Some("invalid_spec"));
    assert!(err["message"].as_str().unwrap().contains("pitch_um"));

    // Malformed JSON.
    std::fs::write(dir.join("broken.json"), "{ not json").unwrap();
    let err = run_expect_failure(
        dir,
        &["gen-design", "--spec", "broken.json", "--out", "design.pdn.json"],
    );
    assert_eq!(err["error"].as_str(), Some("format"));
}
