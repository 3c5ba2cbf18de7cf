//! Finite-difference gradient verification helpers.

/// Central-difference gradient of `f` at `x` with step `h` (default callers
/// use 1e-5). Perturbs `x` in place and restores it.
pub fn central_diff(x: &mut [f64], mut f: impl FnMut(&[f64]) -> f64, h: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let fp = f(x);
        x[i] = orig - h;
        let fm = f(x);
        x[i] = orig;
        g.push((fp - fm) / (2.0 * h));
    }
    g
}

/// Max over coordinates of `|a − n| / max(|a|, |n|, 1e-6)`; the absolute
/// floor keeps near-zero gradient pairs from blowing up the ratio.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}
