//! Predictor configuration.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

fn default_c1() -> usize {
    8
}
fn default_c2() -> usize {
    8
}
fn default_c3() -> usize {
    16
}
fn default_depth() -> usize {
    2
}
fn default_kernel() -> usize {
    3
}

/// Architecture and initialization parameters. One model is built per design:
/// the tile grid (`m`×`n`) and bump count `b` are fixed at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// tile columns
    pub m: usize,
    /// tile rows
    pub n: usize,
    /// bump count = distance-feature channels
    pub b: usize,
    /// distance-subnet channel width
    #[serde(default = "default_c1")]
    pub c1: usize,
    /// fusion-subnet channel width
    #[serde(default = "default_c2")]
    pub c2: usize,
    /// noise-subnet channel width
    #[serde(default = "default_c3")]
    pub c3: usize,
    /// stride-2 levels in the two U-Nets
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// conv kernel size (odd)
    #[serde(default = "default_kernel")]
    pub kernel: usize,
    /// aggregate raw current maps instead of learned per-map features
    #[serde(default)]
    pub fusion_bypass: bool,
    /// weight-initialization seed
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(m: usize, n: usize, b: usize, seed: u64) -> Self {
        ModelConfig {
            m,
            n,
            b,
            c1: default_c1(),
            c2: default_c2(),
            c3: default_c3(),
            depth: default_depth(),
            kernel: default_kernel(),
            fusion_bypass: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 4 || self.n < 4 {
            return Err(Error::InvalidSpec(format!(
                "tile grid {}×{} too small (need at least 4×4)",
                self.m, self.n
            )));
        }
        if self.b < 1 {
            return Err(Error::InvalidSpec("bump count must be ≥ 1".into()));
        }
        if self.c1 < 1 || self.c2 < 1 || self.c3 < 1 {
            return Err(Error::InvalidSpec("channel widths must be ≥ 1".into()));
        }
        if self.depth < 1 {
            return Err(Error::InvalidSpec("depth must be ≥ 1".into()));
        }
        if self.kernel % 2 == 0 || self.kernel < 1 {
            return Err(Error::InvalidSpec(format!("kernel size {} must be odd", self.kernel)));
        }
        Ok(())
    }
}
