//! Sparse SPD system assembly and banded Cholesky factorization.
//!
//! The transient step equation is, in droop coordinates `u = vdd − v`:
//!
//! ```text
//! (G + C/Δt + G_bump) · u[k] = i_load[k] + (C/Δt) · u[k−1] − h[k]
//! ```
//!
//! where `G` holds mesh conductances, `C/Δt` the backward-Euler capacitor
//! companions, and each bump branch (series R, optional L, to the ideal
//! supply) contributes a companion conductance `g_eq = Δt/(R·Δt + L)` plus a
//! history current `h[k] = L/(R·Δt + L) · I_b[k−1]`.
//!
//! Mesh node numbering is row-major, so the matrix is narrow-banded; we store
//! the lower band column-major and factor it in place with a left-looking
//! Cholesky whose inner loops run over contiguous column slices. One
//! factorization serves every stamp of every trace at a given Δt.

use crate::error::{Error, Result};
use crate::grid::PdnGrid;

/// Number of right-hand sides advanced in lockstep by the blocked solver.
pub const SOLVE_LANES: usize = 8;

/// Symmetric banded matrix, lower triangle, column-major within the band.
///
/// Entry `(j + d, j)` for `d ∈ 0..=bw` lives at `cols[j·(bw+1) + d]`.
/// Entries beyond row `n−1` are padding and stay zero.
#[derive(Debug, Clone)]
pub struct Banded {
    pub n: usize,
    pub bw: usize,
    pub cols: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Banded { n, bw, cols: vec![0.0; n * (bw + 1)] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i >= j && i - j <= self.bw);
        self.cols[j * (self.bw + 1) + (i - j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        debug_assert!(i >= j && i - j <= self.bw);
        &mut self.cols[j * (self.bw + 1) + (i - j)]
    }

    /// Symmetric matrix-vector product `out = A·x` (band interpreted as the
    /// lower triangle of a symmetric matrix).
    pub fn sym_matvec(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        out.fill(0.0);
        let w = self.bw + 1;
        for j in 0..self.n {
            let col = &self.cols[j * w..j * w + w];
            out[j] += col[0] * x[j];
            let reach = (self.n - 1 - j).min(self.bw);
            for d in 1..=reach {
                out[j + d] += col[d] * x[j];
                out[j] += col[d] * x[j + d];
            }
        }
    }

    /// Max absolute row sum (infinity norm) of the symmetric matrix.
    pub fn inf_norm(&self) -> f64 {
        let mut row_abs = vec![0.0f64; self.n];
        let w = self.bw + 1;
        for j in 0..self.n {
            let col = &self.cols[j * w..j * w + w];
            row_abs[j] += col[0].abs();
            let reach = (self.n - 1 - j).min(self.bw);
            for d in 1..=reach {
                row_abs[j + d] += col[d].abs();
                row_abs[j] += col[d].abs();
            }
        }
        row_abs.into_iter().fold(0.0, f64::max)
    }
}

/// Cholesky factor `L` (same band as the input) plus precomputed reciprocal
/// diagonal, shared by the scalar and blocked solvers so both produce
/// bit-identical results.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub l: Banded,
    inv_diag: Vec<f64>,
}

/// Factor a symmetric positive definite banded matrix as `A = L·Lᵀ`.
///
/// Left-looking column algorithm; fails with [`Error::NotSpd`] naming the
/// first row whose pivot is not strictly positive.
pub fn cholesky(a: &Banded) -> Result<CholeskyFactor> {
    let (n, bw, w) = (a.n, a.bw, a.bw + 1);
    let mut l = a.clone();
    for j in 0..n {
        // Fold in contributions of earlier columns k that reach row j.
        let k0 = j.saturating_sub(bw);
        for k in k0..j {
            let ljk = l.cols[k * w + (j - k)];
            if ljk == 0.0 {
                continue;
            }
            // Rows i ∈ [j, min(k+bw, n−1)] of column k overlap column j.
            let hi = (k + bw).min(n - 1);
            let len = hi + 1 - j;
            let (head, tail) = l.cols.split_at_mut(j * w);
            let src = &head[k * w + (j - k)..k * w + (j - k) + len];
            let dst = &mut tail[0..len];
            for t in 0..len {
                dst[t] -= src[t] * ljk;
            }
        }
        let d = l.cols[j * w];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotSpd { node: j });
        }
        let s = d.sqrt();
        l.cols[j * w] = s;
        let inv = 1.0 / s;
        let reach = (n - 1 - j).min(bw);
        for t in 1..=reach {
            l.cols[j * w + t] *= inv;
        }
        for t in reach + 1..w {
            l.cols[j * w + t] = 0.0;
        }
    }
    let inv_diag = (0..n).map(|j| 1.0 / l.cols[j * w]).collect();
    Ok(CholeskyFactor { l, inv_diag })
}

impl CholeskyFactor {
    /// Solve `A·x = b` in place (`b` enters, `x` leaves).
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.l.n);
        let (n, bw, w) = (self.l.n, self.l.bw, self.l.bw + 1);
        // Forward: L·y = b.
        for j in 0..n {
            let xj = x[j] * self.inv_diag[j];
            x[j] = xj;
            let reach = (n - 1 - j).min(bw);
            let col = &self.l.cols[j * w + 1..j * w + 1 + reach];
            let xs = &mut x[j + 1..j + 1 + reach];
            for t in 0..reach {
                xs[t] -= col[t] * xj;
            }
        }
        // Backward: Lᵀ·x = y.
        for j in (0..n).rev() {
            let reach = (n - 1 - j).min(bw);
            let col = &self.l.cols[j * w + 1..j * w + 1 + reach];
            let xs = &x[j + 1..j + 1 + reach];
            let mut acc = 0.0;
            for t in 0..reach {
                acc += col[t] * xs[t];
            }
            x[j] = (x[j] - acc) * self.inv_diag[j];
        }
    }

    /// Solve `SOLVE_LANES` independent systems in lockstep.
    ///
    /// `x[j][lane]` holds entry `j` of right-hand side `lane`. Each lane
    /// performs exactly the arithmetic of [`Self::solve_in_place`], so the
    /// results are bit-identical to lane-by-lane scalar solves; the blocked
    /// layout exists purely to amortize factor traffic over 8 solves.
    pub fn solve_lanes_in_place(&self, x: &mut [[f64; SOLVE_LANES]]) {
        assert_eq!(x.len(), self.l.n);
        let (n, bw, w) = (self.l.n, self.l.bw, self.l.bw + 1);
        for j in 0..n {
            let inv = self.inv_diag[j];
            let mut xj = x[j];
            for v in &mut xj {
                *v *= inv;
            }
            x[j] = xj;
            let reach = (n - 1 - j).min(bw);
            let col = &self.l.cols[j * w + 1..j * w + 1 + reach];
            let xs = &mut x[j + 1..j + 1 + reach];
            for t in 0..reach {
                let c = col[t];
                let row = &mut xs[t];
                for lane in 0..SOLVE_LANES {
                    row[lane] -= c * xj[lane];
                }
            }
        }
        for j in (0..n).rev() {
            let reach = (n - 1 - j).min(bw);
            let col = &self.l.cols[j * w + 1..j * w + 1 + reach];
            let mut acc = [0.0f64; SOLVE_LANES];
            {
                let xs = &x[j + 1..j + 1 + reach];
                for t in 0..reach {
                    let c = col[t];
                    for lane in 0..SOLVE_LANES {
                        acc[lane] += c * xs[t][lane];
                    }
                }
            }
            let inv = self.inv_diag[j];
            let row = &mut x[j];
            for lane in 0..SOLVE_LANES {
                row[lane] = (row[lane] - acc[lane]) * inv;
            }
        }
    }
}

/// Per-bump backward-Euler companion values.
#[derive(Debug, Clone, Copy)]
pub struct BumpStamp {
    pub node: usize,
    /// Companion conductance Δt/(R·Δt + L); 1/R at DC or when L is absent.
    pub g_eq: f64,
    /// History coefficient L/(R·Δt + L); 0 when L is absent.
    pub hist_coef: f64,
}

/// Assembled (and optionally factored) system for one grid and one Δt.
#[derive(Debug, Clone)]
pub struct TransientSystem {
    pub n: usize,
    /// Δt in seconds; `None` for the DC (G-only) system.
    pub dt_s: Option<f64>,
    pub a: Banded,
    pub cap_over_dt: Vec<f64>,
    pub bump_stamps: Vec<BumpStamp>,
    factor: Option<CholeskyFactor>,
}

fn assemble(grid: &PdnGrid, dt_s: Option<f64>) -> Result<TransientSystem> {
    let diags = crate::grid::validate_grid(grid);
    if let Some(first) = diags.first() {
        return Err(Error::InvalidGrid(first.clone()));
    }
    if let Some(dt) = dt_s {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidSpec(format!("dt must be positive, got {dt}")));
        }
    }
    let n = grid.n_nodes();
    let bw = grid.edges.iter().map(|e| e.a.abs_diff(e.b)).max().unwrap_or(0);
    let mut a = Banded::zeros(n, bw);

    for e in &grid.edges {
        let (lo, hi) = if e.a < e.b { (e.a, e.b) } else { (e.b, e.a) };
        *a.at_mut(lo, lo) += e.g_s;
        *a.at_mut(hi, hi) += e.g_s;
        *a.at_mut(hi, lo) -= e.g_s;
    }

    let mut cap_over_dt = vec![0.0; n];
    if let Some(dt) = dt_s {
        for (i, &c) in grid.node_caps_f.iter().enumerate() {
            let cod = c / dt;
            cap_over_dt[i] = cod;
            *a.at_mut(i, i) += cod;
        }
    }

    let mut bump_stamps = Vec::with_capacity(grid.bumps.len());
    for b in &grid.bumps {
        let (g_eq, hist_coef) = match (dt_s, b.ind_h) {
            // At DC the inductor is a short; only R limits the branch.
            (None, _) | (Some(_), None) => (1.0 / b.res_ohm, 0.0),
            (Some(dt), Some(l)) => {
                let denom = b.res_ohm * dt + l;
                (dt / denom, l / denom)
            }
        };
        *a.at_mut(b.node, b.node) += g_eq;
        bump_stamps.push(BumpStamp { node: b.node, g_eq, hist_coef });
    }

    Ok(TransientSystem { n, dt_s, a, cap_over_dt, bump_stamps, factor: None })
}

impl TransientSystem {
    /// Assemble the backward-Euler system `G + C/Δt + G_bump` for a grid.
    pub fn stamp(grid: &PdnGrid, dt_s: f64) -> Result<Self> {
        assemble(grid, Some(dt_s))
    }

    /// Assemble the DC system (conductances and bump resistances only).
    pub fn stamp_dc(grid: &PdnGrid) -> Result<Self> {
        assemble(grid, None)
    }

    /// Factor the assembled matrix; required before any solve.
    pub fn factor(&mut self) -> Result<()> {
        self.factor = Some(cholesky(&self.a)?);
        Ok(())
    }

    pub fn is_factored(&self) -> bool {
        self.factor.is_some()
    }

    fn require_factor(&self) -> Result<&CholeskyFactor> {
        self.factor.as_ref().ok_or_else(|| Error::Invalid("system not factored".into()))
    }

    /// Solve `A·x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        self.require_factor()?.solve_in_place(x);
        Ok(())
    }

    /// Solve 8 right-hand sides in lockstep (see [`CholeskyFactor::solve_lanes_in_place`]).
    pub fn solve_lanes_in_place(&self, x: &mut [[f64; SOLVE_LANES]]) -> Result<()> {
        self.require_factor()?.solve_lanes_in_place(x);
        Ok(())
    }

    /// `out = A·x`, for residual checks.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.a.sym_matvec(x, out);
    }

    /// Relative reconstruction error `‖A − L·Lᵀ‖∞ / ‖A‖∞` of the factor —
    /// a direct correctness certificate for the factorization.
    pub fn factor_rel_residual(&self) -> Result<f64> {
        let f = self.require_factor()?;
        let (n, bw, w) = (self.a.n, self.a.bw, self.a.bw + 1);
        let mut row_err = vec![0.0f64; n];
        // (L·Lᵀ)(i,j) = Σ_k L(i,k)·L(j,k); band-limited: |i−j| ≤ bw.
        for j in 0..n {
            let reach = (n - 1 - j).min(bw);
            for d in 0..=reach {
                let i = j + d;
                let k0 = i.saturating_sub(bw);
                let mut s = 0.0;
                for k in k0..=j {
                    s += f.l.cols[k * w + (i - k)] * f.l.cols[k * w + (j - k)];
                }
                let err = (self.a.cols[j * w + d] - s).abs();
                row_err[i] += err;
                if d > 0 {
                    row_err[j] += err;
                }
            }
        }
        let max_err = row_err.into_iter().fold(0.0, f64::max);
        Ok(max_err / self.a.inf_norm())
    }
}
