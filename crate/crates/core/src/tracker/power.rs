use nalgebra::{DMatrix, DVector};

/// Largest eigenvalue of a symmetric positive semi-definite matrix by power
/// iteration, inflated by 1% so that `1/L` is a safe gradient step.
pub(crate) fn lipschitz_bound(h: &DMatrix<f64>) -> f64 {
    let n = h.nrows();
    // deterministic start with no special alignment to any eigenvector
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * (i as f64 + 1.0).sin());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let w = h * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return f64::MIN_POSITIVE;
        }
        v = w / norm;
        if (next - lambda).abs() <= 1e-12 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda * 1.01
}
