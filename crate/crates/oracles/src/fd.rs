//! Finite-difference helpers.

use nalgebra::DVector;

/// One-sided differences `(f(s) − f(0))/s` for each step in `steps`.
pub fn one_sided<F: Fn(f64) -> DVector<f64>>(f: F, steps: &[f64]) -> Vec<DVector<f64>> {
    let f0 = f(0.0);
    steps.iter().map(|&s| (f(s) - &f0) / s).collect()
}

/// Central difference `(f(s) − f(−s))/(2s)`.
pub fn central<F: Fn(f64) -> DVector<f64>>(f: F, step: f64) -> DVector<f64> {
    (f(step) - f(-step)) / (2.0 * step)
}

/// Richardson-extrapolated one-sided difference from steps `s` and `s/2`.
pub fn richardson<F: Fn(f64) -> DVector<f64>>(f: F, step: f64) -> DVector<f64> {
    let d = one_sided(f, &[step, step / 2.0]);
    &d[1] * 2.0 - &d[0]
}

/// Geometric step schedule from `hi` down to `lo`, one step per decade.
pub fn schedule(hi: f64, lo: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut s = hi;
    while s >= lo * (1.0 - 1e-12) {
        out.push(s);
        s /= 10.0;
    }
    out
}
