//! Dense 64-bit tensors for the network kernels.
//!
//! A tensor holds `c` channel planes of `h × w` values, stored row-major,
//! with an innermost *lane* dimension: element `(ch, y, x, lane)` lives at
//! `((ch·h + y)·w + x)·lanes + lane`. A lane is an independent image sharing
//! the same layer weights: `lanes = 1` is a single image, `lanes = K`
//! evaluates K images in lockstep. Because lanes are innermost, every kernel
//! inner loop is an fma over a contiguous run, which is what makes the
//! per-map fusion passes affordable on one core. Per-lane results are
//! bit-identical to running each lane alone (each output element has its own
//! accumulation chain).

/// Dense (channels, height, width, lanes) tensor of f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub lanes: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(c: usize, h: usize, w: usize, lanes: usize) -> Self {
        Tensor { c, h, w, lanes, data: vec![0.0; c * h * w * lanes] }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, lanes: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), c * h * w * lanes, "tensor data length mismatch");
        Tensor { c, h, w, lanes, data }
    }

    /// Single-lane (c,h,w) tensor.
    pub fn from_planes(c: usize, h: usize, w: usize, data: Vec<f64>) -> Self {
        Self::from_vec(c, h, w, 1, data)
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn idx(&self, ch: usize, y: usize, x: usize, lane: usize) -> usize {
        debug_assert!(ch < self.c && y < self.h && x < self.w && lane < self.lanes);
        ((ch * self.h + y) * self.w + x) * self.lanes + lane
    }

    #[inline]
    pub fn at(&self, ch: usize, y: usize, x: usize, lane: usize) -> f64 {
        self.data[self.idx(ch, y, x, lane)]
    }

    #[inline]
    pub fn at_mut(&mut self, ch: usize, y: usize, x: usize, lane: usize) -> &mut f64 {
        let i = self.idx(ch, y, x, lane);
        &mut self.data[i]
    }

    /// Offset of row `y` of channel `ch` (length `w·lanes`).
    #[inline]
    pub fn row_off(&self, ch: usize, y: usize) -> usize {
        (ch * self.h + y) * self.w * self.lanes
    }

    /// One channel plane as a slice (length `h·w·lanes`).
    pub fn plane(&self, ch: usize) -> &[f64] {
        let n = self.h * self.w * self.lanes;
        &self.data[ch * n..(ch + 1) * n]
    }

    /// Extract a single lane as a `lanes = 1` tensor.
    pub fn lane(&self, lane: usize) -> Tensor {
        assert!(lane < self.lanes);
        let mut data = Vec::with_capacity(self.c * self.h * self.w);
        data.extend(self.data.iter().skip(lane).step_by(self.lanes));
        Tensor { c: self.c, h: self.h, w: self.w, lanes: 1, data }
    }

    /// Debug-build guard: layers reject non-finite activations at boundaries.
    #[inline]
    pub fn debug_check_finite(&self, context: &str) {
        #[cfg(debug_assertions)]
        {
            if let Some(bad) = self.data.iter().find(|v| !v.is_finite()) {
                panic!("non-finite value {bad} in {context}");
            }
        }
        #[cfg(not(debug_assertions))]
        {
            let _ = context;
        }
    }
}

/// `dst += a · src`, the workhorse inner loop of every kernel.
#[inline]
pub fn axpy(dst: &mut [f64], a: f64, src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d += a * *s;
    }
}

const SUM_CHUNK: usize = 8;

/// Dot product with a fixed 8-way accumulator split.
///
/// A strictly sequential float sum cannot be vectorized, so reductions use
/// eight independent partial sums combined in a fixed order: fast and still
/// deterministic (the chunking never changes).
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; SUM_CHUNK];
    let mut ai = a.chunks_exact(SUM_CHUNK);
    let mut bi = b.chunks_exact(SUM_CHUNK);
    for (ca, cb) in ai.by_ref().zip(bi.by_ref()) {
        for j in 0..SUM_CHUNK {
            acc[j] += ca[j] * cb[j];
        }
    }
    for (j, (x, y)) in ai.remainder().iter().zip(bi.remainder()).enumerate() {
        acc[j] += x * y;
    }
    acc.iter().sum()
}

/// Sum with the same fixed 8-way accumulator split as [`dot`].
#[inline]
pub fn sum(a: &[f64]) -> f64 {
    let mut acc = [0.0f64; SUM_CHUNK];
    let mut ai = a.chunks_exact(SUM_CHUNK);
    for ca in ai.by_ref() {
        for j in 0..SUM_CHUNK {
            acc[j] += ca[j];
        }
    }
    for (j, x) in ai.remainder().iter().enumerate() {
        acc[j] += x;
    }
    acc.iter().sum()
}
