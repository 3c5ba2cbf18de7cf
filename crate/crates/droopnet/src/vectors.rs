//! Synthetic test-vector generation.
//!
//! Each load's waveform alternates idle (zero-current) and burst segments.
//! Segment lengths are drawn uniformly from configured ranges, each burst
//! gets its own uniformly drawn amplitude, and bursts are shaped with linear
//! rise/fall ramps. Long steady stretches are deliberate: temporal
//! compression exists to discard them, so vectors must contain them.

use crate::error::{Error, Result};
use crate::grid::PdnGrid;
use crate::rng::{derive_seed, purpose, stream};
use crate::sim::CurrentTrace;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Parameters of the idle/burst waveform generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSpec {
    pub n_stamps: usize,
    pub dt_s: f64,
    /// Idle segment length range [min, max] in stamps.
    pub idle_len: (usize, usize),
    /// Burst segment length range [min, max] in stamps.
    pub burst_len: (usize, usize),
    /// Burst amplitude range [min, max] in A.
    pub amp_a: (f64, f64),
    /// Linear rise/fall length in stamps (0 = square edges).
    pub ramp_stamps: usize,
    pub seed: u64,
}

impl VectorSpec {
    fn validate(&self) -> Result<()> {
        if self.n_stamps == 0 {
            return Err(Error::InvalidSpec("n_stamps must be ≥ 1".into()));
        }
        if !(self.dt_s > 0.0) {
            return Err(Error::InvalidSpec("dt must be positive".into()));
        }
        for (name, (lo, hi)) in [("idle_len", self.idle_len), ("burst_len", self.burst_len)] {
            if lo < 1 || hi < lo {
                return Err(Error::InvalidSpec(format!(
                    "{name} range [{lo}, {hi}] invalid (need 1 ≤ min ≤ max)"
                )));
            }
        }
        let (alo, ahi) = self.amp_a;
        if !(alo >= 0.0) || !(ahi >= alo) || !ahi.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "amplitude range [{alo}, {ahi}] invalid"
            )));
        }
        Ok(())
    }

    /// Expected burst duty cycle implied by the segment-length ranges.
    pub fn expected_duty(&self) -> f64 {
        let idle = (self.idle_len.0 + self.idle_len.1) as f64 / 2.0;
        let burst = (self.burst_len.0 + self.burst_len.1) as f64 / 2.0;
        burst / (idle + burst)
    }
}

fn gen_range_inclusive(rng: &mut impl Rng, lo: usize, hi: usize) -> usize {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Generate the waveform of one load into `out` (length = n_stamps).
fn fill_waveform(spec: &VectorSpec, rng: &mut impl Rng, out: &mut [f64]) {
    // Idle segments are represented by skipping writes, so the buffer (which
    // callers may reuse across loads) must start at zero.
    out.fill(0.0);
    // Random initial phase: start mid-way through an idle or burst segment so
    // loads are decorrelated from stamp 0.
    let start_burst = rng.gen_bool(spec.expected_duty());
    let mut k = 0usize;
    let mut in_burst = start_burst;
    let mut first = true;
    while k < out.len() {
        let (lo, hi) = if in_burst { spec.burst_len } else { spec.idle_len };
        let mut len = gen_range_inclusive(rng, lo, hi);
        if first {
            // consume a random fraction of the first segment
            len = len - rng.gen_range(0..len);
            first = false;
        }
        let len = len.min(out.len() - k);
        if in_burst {
            let amp = if spec.amp_a.1 > spec.amp_a.0 {
                rng.gen_range(spec.amp_a.0..=spec.amp_a.1)
            } else {
                spec.amp_a.0
            };
            // Ramp lengths never overlap: cap at half the segment.
            let ramp = spec.ramp_stamps.min(len / 2);
            for (s, slot) in out[k..k + len].iter_mut().enumerate() {
                let shape = if s < ramp {
                    (s + 1) as f64 / (ramp + 1) as f64
                } else if len - 1 - s < ramp {
                    (len - s) as f64 / (ramp + 1) as f64
                } else {
                    1.0
                };
                *slot = amp * shape;
            }
        }
        k += len;
        in_burst = !in_burst;
    }
}

/// Generate the trace of vector `index` for `grid` (one waveform per load).
pub fn generate_trace(spec: &VectorSpec, grid: &PdnGrid, index: usize) -> Result<CurrentTrace> {
    spec.validate()?;
    let n_loads = grid.n_loads();
    let trace_seed = derive_seed(spec.seed, purpose::VECTOR, index as u64);
    let mut currents = vec![0.0f64; spec.n_stamps * n_loads];
    let mut wave = vec![0.0f64; spec.n_stamps];
    for l in 0..n_loads {
        let mut rng = stream(trace_seed, purpose::VECTOR, l as u64);
        fill_waveform(spec, &mut rng, &mut wave);
        for k in 0..spec.n_stamps {
            currents[k * n_loads + l] = wave[k];
        }
    }
    Ok(CurrentTrace { dt_s: spec.dt_s, n_loads, currents_a: currents })
}

/// Generate `count` traces (vector indices 0..count).
pub fn generate_vectors(
    spec: &VectorSpec,
    grid: &PdnGrid,
    count: usize,
) -> Result<Vec<CurrentTrace>> {
    if count == 0 {
        return Err(Error::InvalidSpec("vector count must be ≥ 1".into()));
    }
    (0..count).map(|i| generate_trace(spec, grid, i)).collect()
}
