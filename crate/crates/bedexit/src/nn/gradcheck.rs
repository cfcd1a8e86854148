//! Central finite-difference gradient checking.
//!
//! The step for coordinate i is `h = h_scale * max(1, |x_i|)`. Relative
//! error compares against the larger magnitude of the two gradients and
//! falls back to absolute error when both are tiny.

/// Numeric gradient of `f` at `x` by central differences.
pub fn central_diff<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h_scale: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = h_scale * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let f_plus = f(&probe);
        probe[i] = x[i] - h;
        let f_minus = f(&probe);
        probe[i] = x[i];
        grad[i] = (f_plus - f_minus) / (2.0 * h);
    }
    grad
}

/// Worst per-coordinate discrepancy between an analytic and a numeric
/// gradient.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let mut worst: f64 = 0.0;
    for (&a, &n) in analytic.iter().zip(numeric) {
        let denom = a.abs().max(n.abs());
        let err = if denom > 1e-6 { (a - n).abs() / denom } else { (a - n).abs() };
        worst = worst.max(err);
    }
    worst
}
