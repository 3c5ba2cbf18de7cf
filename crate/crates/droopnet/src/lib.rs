//! Worst-case dynamic voltage-droop prediction for on-chip power grids.
//!
//! The crate covers the full pipeline at desk scale:
//!
//! 1. [`grid`] — synthesize an RC power mesh with bump branches and loads;
//! 2. [`vectors`] — synthesize idle/burst load-current test vectors;
//! 3. [`system`]/[`sim`] — ground truth: backward-Euler transient solves on
//!    a banded Cholesky factorization, reduced to per-tile worst-case noise;
//! 4. [`tiling`]/[`compress`] — spatial tiling of currents and temporal
//!    compression that keeps the `μ + 3σ`-preserving subset of stamps;
//! 5. [`features`]/[`nn`]/[`model`] — a three-subnet convolutional predictor
//!    (distance reduction, per-map fusion, noise prediction) with hand-rolled
//!    forward/backward passes in f64;
//! 6. [`dataset`]/[`train`] — expansion-based training-set construction and
//!    an Adam training loop with early stopping;
//! 7. [`eval`] — accuracy/hotspot/AUC metrics, runtime benchmarks, and the
//!    compression-rate sweep.
//!
//! Everything is deterministic per seed: reruns produce byte-identical
//! artifacts.

pub mod compress;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod grid;
pub mod model;
pub mod nn;
pub mod rng;
pub mod sim;
pub mod svg;
pub mod system;
pub mod tiling;
pub mod tns;
pub mod train;
pub mod vectors;

pub use error::{Error, Result};
