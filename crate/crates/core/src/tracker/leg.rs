use nalgebra::{Matrix2, Vector2};

use super::TrackerError;

/// Planar two-link swing leg (hip and knee revolute joints).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLinkLeg {
    pub link_lengths: [f64; 2],
    pub q: Vector2<f64>,
    pub qd: Vector2<f64>,
}

impl TwoLinkLeg {
    pub fn new(link_lengths: [f64; 2], q: Vector2<f64>, qd: Vector2<f64>) -> Self {
        Self {
            link_lengths,
            q,
            qd,
        }
    }

    pub fn foot_position(&self, q: &Vector2<f64>) -> Vector2<f64> {
        let [l1, l2] = self.link_lengths;
        let a = q[0];
        let b = q[0] + q[1];
        Vector2::new(l1 * a.cos() + l2 * b.cos(), l1 * a.sin() + l2 * b.sin())
    }

    pub fn jacobian(&self) -> Matrix2<f64> {
        let [l1, l2] = self.link_lengths;
        let (s1, c1) = self.q[0].sin_cos();
        let (s12, c12) = (self.q[0] + self.q[1]).sin_cos();
        Matrix2::new(-l1 * s1 - l2 * s12, -l2 * s12, l1 * c1 + l2 * c12, l2 * c12)
    }

    pub fn jacobian_dot(&self) -> Matrix2<f64> {
        let [l1, l2] = self.link_lengths;
        let (s1, c1) = self.q[0].sin_cos();
        let (s12, c12) = (self.q[0] + self.q[1]).sin_cos();
        let w1 = self.qd[0];
        let w12 = self.qd[0] + self.qd[1];
        Matrix2::new(
            -l1 * c1 * w1 - l2 * c12 * w12,
            -l2 * c12 * w12,
            -l1 * s1 * w1 - l2 * s12 * w12,
            -l2 * s12 * w12,
        )
    }
}

/// Joint accelerations realizing a desired foot acceleration:
/// solves `J qdd = rdd - Jdot qd`.
pub fn leg_accel_solve(
    leg: &TwoLinkLeg,
    foot_accel: &Vector2<f64>,
) -> Result<Vector2<f64>, TrackerError> {
    let j = leg.jacobian();
    let det = j.determinant();
    if det.abs() <= 1e-8 {
        return Err(TrackerError::SingularConfiguration { det });
    }
    let rhs = foot_accel - leg.jacobian_dot() * leg.qd;
    // Cramer's rule on the 2x2 system
    Ok(Vector2::new(
        (rhs[0] * j[(1, 1)] - j[(0, 1)] * rhs[1]) / det,
        (j[(0, 0)] * rhs[1] - rhs[0] * j[(1, 0)]) / det,
    ))
}

/// Drive law `tau = tau_ff + Kp (q* - q) + Kd (qd* - qd)` with diagonal gains.
pub fn pid_torque(
    tau_ff: &[f64],
    q_star: &[f64],
    qd_star: &[f64],
    q: &[f64],
    qd: &[f64],
    kp: &[f64],
    kd: &[f64],
) -> Result<Vec<f64>, TrackerError> {
    let n = tau_ff.len();
    let lens = [
        q_star.len(),
        qd_star.len(),
        q.len(),
        qd.len(),
        kp.len(),
        kd.len(),
    ];
    if lens.iter().any(|&l| l != n) {
        return Err(TrackerError::DimensionMismatch(format!(
            "pid_torque expects {n} entries everywhere, got {lens:?}"
        )));
    }
    Ok((0..n)
        .map(|i| tau_ff[i] + kp[i] * (q_star[i] - q[i]) + kd[i] * (qd_star[i] - qd[i]))
        .collect())
}
