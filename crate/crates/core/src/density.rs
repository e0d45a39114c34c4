//! Analytical density function built from inverse bump functions.
//!
//! For obstacles `k = 1..L` the density is
//!
//! ```text
//! rho(x) = prod_k Phi_k(x) / V(x)^alpha,     V(x) = |x - target|^2
//! ```
//!
//! where `Phi_k` is 0 on the closed unsafe ball, 1 outside the sensing ball
//! and a `C^inf` smooth step in between. The closed-loop field `x' = grad rho`
//! is the feedback plan; [`check_divergence`] samples the divergence
//! condition `div(rho * grad rho) > 0` that certifies almost-everywhere
//! convergence.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Environment, Obstacle, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityParams {
    /// Exponent on the distance function `V`.
    pub alpha: f64,
    /// Radius inside which the feedback is exactly `-(x - target)`.
    pub blend_inner: f64,
    /// Radius outside which the feedback is exactly `grad rho`.
    pub blend_outer: f64,
    /// Central-difference step for numerical derivatives.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

fn default_fd_step() -> f64 {
    1e-5
}

impl Default for DensityParams {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            blend_inner: 0.5,
            blend_outer: 1.0,
            fd_step: default_fd_step(),
        }
    }
}

impl DensityParams {
    /// Radius of the ball around the target where density evaluation errors.
    #[inline]
    pub fn singularity_radius(&self) -> f64 {
        self.blend_inner / 10.0
    }

    pub fn validate(&self) -> Result<(), DensityError> {
        let ok = self.alpha > 0.0
            && self.blend_inner > 0.0
            && self.blend_inner < self.blend_outer
            && self.fd_step > 0.0
            && self.alpha.is_finite()
            && self.blend_outer.is_finite();
        if ok {
            Ok(())
        } else {
            Err(DensityError::InvalidParams(format!(
                "need alpha > 0, 0 < blend_inner < blend_outer, fd_step > 0 (got {self:?})"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("density is singular at the target (distance {distance:e} < {radius:e})")]
    Singularity { distance: f64, radius: f64 },
    #[error("invalid density parameters: {0}")]
    InvalidParams(String),
}

/// `exp(-1/tau)` for `tau > 0`, else 0.
#[inline]
pub fn elementary_f(tau: f64) -> f64 {
    if tau > 0.0 {
        (-1.0 / tau).exp()
    } else {
        0.0
    }
}

/// Smooth step `f(tau) / (f(tau) + f(1 - tau))`, 0 below 0 and 1 above 1.
#[inline]
pub fn smooth_step(tau: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else if tau >= 1.0 {
        1.0
    } else {
        let a = elementary_f(tau);
        let b = elementary_f(1.0 - tau);
        a / (a + b)
    }
}

/// Derivative of [`smooth_step`].
///
/// With `f'(t) = f(t)/t^2` the quotient rule collapses to
/// `p q (1/tau^2 + 1/(1-tau)^2)` where `p = f(tau)/s`, `q = f(1-tau)/s`,
/// `s = f(tau) + f(1-tau)`.
#[inline]
pub fn smooth_step_deriv(tau: f64) -> f64 {
    if tau <= 0.0 || tau >= 1.0 {
        return 0.0;
    }
    let comp = 1.0 - tau;
    let a = elementary_f(tau);
    let b = elementary_f(comp);
    let s = a + b;
    (a / s) * (b / s) * (1.0 / (tau * tau) + 1.0 / (comp * comp))
}

#[inline]
fn bump_arg(ob: &Obstacle, x: &Point) -> (f64, Vector2<f64>, f64) {
    let d = x - ob.center();
    let r2 = ob.radius_unsafe * ob.radius_unsafe;
    let width = ob.radius_sense * ob.radius_sense - r2;
    ((d.norm_squared() - r2) / width, d, width)
}

/// Inverse bump `Phi_k`: 0 on the unsafe ball, 1 outside the sensing ball.
pub fn bump(ob: &Obstacle, x: &Point) -> f64 {
    let (tau, _, _) = bump_arg(ob, x);
    smooth_step(tau)
}

pub fn bump_grad(ob: &Obstacle, x: &Point) -> Vector2<f64> {
    let (tau, d, width) = bump_arg(ob, x);
    if tau <= 0.0 || tau >= 1.0 {
        return Vector2::zeros();
    }
    d * (2.0 * smooth_step_deriv(tau) / width)
}

fn shifted(
    env: &Environment,
    params: &DensityParams,
    x: &Point,
) -> Result<Vector2<f64>, DensityError> {
    let y = x - env.target();
    let distance = y.norm();
    let radius = params.singularity_radius();
    if distance < radius {
        return Err(DensityError::Singularity { distance, radius });
    }
    Ok(y)
}

pub fn density(env: &Environment, params: &DensityParams, x: &Point) -> Result<f64, DensityError> {
    let y = shifted(env, params, x)?;
    let phi: f64 = env.obstacles.iter().map(|ob| bump(ob, x)).product();
    if phi == 0.0 {
        return Ok(0.0);
    }
    Ok(phi * y.norm_squared().powf(-params.alpha))
}

/// Gradient of the density, with a flag for points inside the unsafe set
/// (where the gradient is reported as zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityGradient {
    pub grad: Vector2<f64>,
    pub inside_unsafe: bool,
}

/// Analytic gradient by the product rule:
///
/// ```text
/// grad rho = V^-a * sum_k grad Phi_k * prod_{j != k} Phi_j
///            - 2a * V^(-a-1) * (x - target) * prod_k Phi_k
/// ```
///
/// The leave-one-out products come from prefix/suffix scans so no division
/// by a vanishing `Phi_k` ever happens.
pub fn density_grad(
    env: &Environment,
    params: &DensityParams,
    x: &Point,
) -> Result<DensityGradient, DensityError> {
    let y = shifted(env, params, x)?;
    if env.in_unsafe(x) {
        return Ok(DensityGradient {
            grad: Vector2::zeros(),
            inside_unsafe: true,
        });
    }
    let n = env.obstacles.len();
    let phis: Vec<f64> = env.obstacles.iter().map(|ob| bump(ob, x)).collect();
    let mut suffix = vec![1.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] * phis[k];
    }
    let mut sum = Vector2::zeros();
    let mut prefix = 1.0;
    for (k, ob) in env.obstacles.iter().enumerate() {
        let others = prefix * suffix[k + 1];
        if others != 0.0 {
            sum += bump_grad(ob, x) * others;
        }
        prefix *= phis[k];
    }
    let v = y.norm_squared();
    let v_pow = v.powf(-params.alpha);
    let grad = sum * v_pow - y * (2.0 * params.alpha * v_pow / v * suffix[0]);
    Ok(DensityGradient {
        grad,
        inside_unsafe: false,
    })
}

/// Central-difference gradient of [`density`] with step `params.fd_step`.
pub fn density_grad_fd(
    env: &Environment,
    params: &DensityParams,
    x: &Point,
) -> Result<Vector2<f64>, DensityError> {
    central_gradient(params.fd_step, x, |p| density(env, params, p))
}

fn central_gradient<F>(h: f64, x: &Point, mut f: F) -> Result<Vector2<f64>, DensityError>
where
    F: FnMut(&Point) -> Result<f64, DensityError>,
{
    let ex = Vector2::new(h, 0.0);
    let ey = Vector2::new(0.0, h);
    let gx = (f(&(x + ex))? - f(&(x - ex))?) / (2.0 * h);
    let gy = (f(&(x + ey))? - f(&(x - ey))?) / (2.0 * h);
    Ok(Vector2::new(gx, gy))
}

/// `div(rho * grad rho)` at `x` by central differences of the analytic
/// flux `rho * grad rho`.
pub fn flux_divergence(
    env: &Environment,
    params: &DensityParams,
    x: &Point,
) -> Result<f64, DensityError> {
    let flux = |p: &Point| -> Result<Vector2<f64>, DensityError> {
        let rho = density(env, params, p)?;
        Ok(density_grad(env, params, p)?.grad * rho)
    };
    let h = params.fd_step;
    let ex = Vector2::new(h, 0.0);
    let ey = Vector2::new(0.0, h);
    let dfx = (flux(&(x + ex))?.x - flux(&(x - ex))?.x) / (2.0 * h);
    let dfy = (flux(&(x + ey))?.y - flux(&(x - ey))?.y) / (2.0 * h);
    Ok(dfx + dfy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub samples_total: usize,
    pub samples_positive: usize,
    pub min_value: f64,
    pub worst_point: [f64; 2],
}

impl DivergenceReport {
    pub fn positive_fraction(&self) -> f64 {
        if self.samples_total == 0 {
            0.0
        } else {
            self.samples_positive as f64 / self.samples_total as f64
        }
    }
}

/// Whether a grid node takes part in the divergence check: outside every
/// unsafe ball, at least `collar` away from each unsafe and sensing circle,
/// and outside the blend ball around the target.
pub fn divergence_sample_admissible(
    env: &Environment,
    params: &DensityParams,
    x: &Point,
    collar: f64,
) -> bool {
    if (x - env.target()).norm() <= params.blend_outer {
        return false;
    }
    env.obstacles.iter().all(|ob| {
        let d = ob.distance(x);
        d > ob.radius_unsafe + collar && (d - ob.radius_sense).abs() >= collar
    })
}

/// Samples the divergence condition on a uniform grid over the workspace.
pub fn check_divergence(
    env: &Environment,
    params: &DensityParams,
    grid_spacing: f64,
) -> DivergenceReport {
    let ws = &env.workspace;
    let nx = (ws.width() / grid_spacing).floor() as usize;
    let ny = (ws.height() / grid_spacing).floor() as usize;
    let collar = 2.0 * grid_spacing;
    let mut report = DivergenceReport {
        samples_total: 0,
        samples_positive: 0,
        min_value: f64::INFINITY,
        worst_point: [f64::NAN, f64::NAN],
    };
    if !(grid_spacing > 0.0) || nx == 0 || ny == 0 {
        return report;
    }
    for i in 0..=nx {
        for j in 0..=ny {
            let x = Point::new(
                ws.min[0] + i as f64 * grid_spacing,
                ws.min[1] + j as f64 * grid_spacing,
            );
            if !divergence_sample_admissible(env, params, &x, collar) {
                continue;
            }
            // The blend ball is far larger than the singular ball, so the
            // stencil never reaches it.
            let Ok(div) = flux_divergence(env, params, &x) else {
                continue;
            };
            report.samples_total += 1;
            if div > 0.0 {
                report.samples_positive += 1;
            }
            if div < report.min_value {
                report.min_value = div;
                report.worst_point = [x.x, x.y];
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Workspace;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn open_env(target: [f64; 2]) -> Environment {
        Environment::new(Workspace::new([-20.0, -20.0], [20.0, 20.0]), target, vec![])
    }

    fn two_obstacles() -> Environment {
        Environment::new(
            Workspace::new([-5.0, -8.0], [15.0, 8.0]),
            [10.0, 0.0],
            vec![
                Obstacle::new([4.0, 1.5], 2.5, 3.0),
                Obstacle::new([5.0, -4.0], 2.5, 4.0),
            ],
        )
    }

    #[test]
    fn elementary_examples() {
        assert_eq!(elementary_f(-5.0), 0.0);
        assert_eq!(elementary_f(0.0), 0.0);
        assert_relative_eq!(
            elementary_f(1.0),
            0.367_879_441_171_442_3,
            max_relative = 1e-15
        );
        assert!(elementary_f(1e-3) >= 0.0);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn smooth_step_examples() {
        assert_eq!(smooth_step(2.0), 1.0);
        assert_eq!(smooth_step(0.5), 0.5);
        assert_eq!(smooth_step(-1.0), 0.0);
        // extended-precision references (40 digits)
        assert_relative_eq!(
            smooth_step(0.25),
            0.064_969_169_128_664_062_13,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            smooth_step(0.1),
            1.378_937_920_163_149_27e-4,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            smooth_step(0.7),
            0.870_429_530_600_294_08,
            max_relative = 1e-13
        );
    }

    #[test]
    fn smooth_step_deriv_examples() {
        assert_eq!(smooth_step_deriv(-1.0), 0.0);
        assert_eq!(smooth_step_deriv(1.5), 0.0);
        assert_relative_eq!(smooth_step_deriv(0.5), 2.0, max_relative = 1e-14);
        assert_relative_eq!(
            smooth_step_deriv(0.3),
            1.483_300_191_799_604_5,
            max_relative = 1e-13
        );
        let h = 1e-5;
        let fd = (smooth_step(0.5 + h) - smooth_step(0.5 - h)) / (2.0 * h);
        assert!((fd - smooth_step_deriv(0.5)).abs() < 1e-8);
    }

    #[test]
    fn bump_boundary_values() {
        let ob = Obstacle::new([1.0, -2.0], 2.5, 3.0);
        let c = ob.center();
        assert_eq!(bump(&ob, &(c + Vector2::new(2.5, 0.0))), 0.0);
        assert_eq!(bump(&ob, &(c + Vector2::new(0.0, 3.0))), 1.0);
        assert_eq!(bump(&ob, &c), 0.0);
        let mid = ((2.5f64.powi(2) + 9.0) / 2.0).sqrt();
        assert!((bump(&ob, &(c + Vector2::new(mid, 0.0))) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bump_grad_regions_and_fd() {
        let ob = Obstacle::new([0.0, 0.0], 2.5, 3.0);
        assert_eq!(bump_grad(&ob, &Point::new(1.0, 1.0)), Vector2::zeros());
        assert_eq!(bump_grad(&ob, &Point::new(3.0, 1.0)), Vector2::zeros());
        let x = Point::new(2.0, 1.8);
        let g = bump_grad(&ob, &x);
        let h = 1e-6;
        let fx = (bump(&ob, &(x + Vector2::new(h, 0.0))) - bump(&ob, &(x - Vector2::new(h, 0.0))))
            / (2.0 * h);
        let fy = (bump(&ob, &(x + Vector2::new(0.0, h))) - bump(&ob, &(x - Vector2::new(0.0, h))))
            / (2.0 * h);
        assert_relative_eq!(g.x, fx, max_relative = 1e-6);
        assert_relative_eq!(g.y, fy, max_relative = 1e-6);
        // radially outward
        assert!(g.dot(&x) > 0.0 && (g.x * x.y - g.y * x.x).abs() < 1e-12);
    }

    #[test]
    fn density_closed_forms() {
        let params = DensityParams {
            alpha: 0.2,
            ..Default::default()
        };
        let env = open_env([10.0, 0.0]);
        let rho = density(&env, &params, &Point::new(0.0, 0.0)).unwrap();
        assert_relative_eq!(rho, 0.398_107_170_553_497_25, max_relative = 1e-14);
        let params = DensityParams {
            alpha: 0.5,
            ..Default::default()
        };
        assert_relative_eq!(density(&env, &params, &Point::new(11.0, 0.0)).unwrap(), 1.0);
        let env = two_obstacles();
        assert_eq!(density(&env, &params, &Point::new(4.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn density_singularity_guard() {
        let env = open_env([0.0, 0.0]);
        let params = DensityParams::default();
        let err = density(&env, &params, &Point::new(0.01, 0.0)).unwrap_err();
        assert!(matches!(err, DensityError::Singularity { .. }));
        assert!(density_grad(&env, &params, &Point::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn density_grad_closed_form_and_unsafe_flag() {
        let params = DensityParams {
            alpha: 0.5,
            ..Default::default()
        };
        let env = open_env([2.0, 3.0]);
        let g = density_grad(&env, &params, &Point::new(3.0, 3.0)).unwrap();
        assert!(!g.inside_unsafe);
        assert_relative_eq!(g.grad.x, -1.0, max_relative = 1e-14);
        assert_eq!(g.grad.y, 0.0);

        let env = two_obstacles();
        let g = density_grad(&env, &params, &Point::new(5.0, -4.5)).unwrap();
        assert!(g.inside_unsafe);
        assert_eq!(g.grad, Vector2::zeros());
    }

    #[test]
    fn fd_matches_closed_form_and_is_second_order() {
        let alpha = 0.2;
        let env = open_env([0.0, 0.0]);
        let x = Point::new(3.0, -1.5);
        let v: f64 = x.norm_squared();
        let exact = -x * (2.0 * alpha * v.powf(-alpha - 1.0));
        let err = |h: f64| {
            let p = DensityParams {
                alpha,
                fd_step: h,
                ..Default::default()
            };
            (density_grad_fd(&env, &p, &x).unwrap() - exact).norm()
        };
        assert!(err(1e-5) / exact.norm() < 1e-8);
        let ratio = err(1e-2) / err(5e-3);
        assert!((ratio - 4.0).abs() < 0.2, "Richardson ratio {ratio}");
    }

    #[test]
    fn fd_symmetry_on_axis() {
        let env = Environment::new(
            Workspace::new([-5.0, -5.0], [15.0, 5.0]),
            [10.0, 0.0],
            vec![Obstacle::new([5.0, 0.0], 1.0, 2.0)],
        );
        let params = DensityParams::default();
        for x in [0.0, 2.0, 3.5, 6.5, 8.0] {
            let g = density_grad_fd(&env, &params, &Point::new(x, 0.0)).unwrap();
            assert!(g.y.abs() < 1e-14, "transverse {} at {x}", g.y);
        }
    }

    #[test]
    fn divergence_closed_form_free_space() {
        let alpha = 0.2;
        let env = open_env([0.0, 0.0]);
        let params = DensityParams {
            alpha,
            ..Default::default()
        };
        let div = flux_divergence(&env, &params, &Point::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(div, 0.32, max_relative = 1e-5);
        let report = check_divergence(&open_env([1.0, 1.0]), &params, 0.5);
        assert!(report.samples_total > 0);
        assert_eq!(report.samples_positive, report.samples_total);
    }

    #[test]
    fn divergence_empty_grid() {
        let env = open_env([0.0, 0.0]);
        let report = check_divergence(&env, &DensityParams::default(), 100.0);
        assert_eq!(report.samples_total, 0);
    }

    proptest! {
        #[test]
        fn smooth_step_complement(tau in -2.0..3.0f64) {
            prop_assert!((smooth_step(tau) + smooth_step(1.0 - tau) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn smooth_step_monotone(a in -0.5..1.5f64, b in -0.5..1.5f64) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(smooth_step(lo) <= smooth_step(hi));
        }

        #[test]
        fn deriv_symmetric(tau in 0.01..0.99f64) {
            let d = smooth_step_deriv(tau);
            prop_assert!(d > 0.0);
            prop_assert!((d - smooth_step_deriv(1.0 - tau)).abs() <= 1e-12 * d.max(1.0));
        }

        #[test]
        fn locality_of_extra_obstacle(x in -4.0..14.0f64, y in -7.0..7.0f64) {
            let env = two_obstacles();
            let p = Point::new(x, y);
            let params = DensityParams::default();
            prop_assume!((p - env.target()).norm() > 0.1);
            let mut more = env.clone();
            more.obstacles.push(Obstacle::new([12.0, 5.0], 0.5, 1.0));
            prop_assume!(!more.obstacles[2].senses(&p));
            prop_assert_eq!(density(&env, &params, &p).unwrap(), density(&more, &params, &p).unwrap());
            prop_assert_eq!(density_grad(&env, &params, &p).unwrap(), density_grad(&more, &params, &p).unwrap());
        }

        #[test]
        fn zero_exactly_on_unsafe(r in 0.0..2.5f64, th in 0.0..std::f64::consts::TAU) {
            let env = two_obstacles();
            let p = env.obstacles[1].center() + Vector2::new(r * th.cos(), r * th.sin());
            prop_assert_eq!(density(&env, &DensityParams::default(), &p).unwrap(), 0.0);
        }
    }
}
