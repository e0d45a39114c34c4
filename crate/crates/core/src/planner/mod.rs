//! Feedback plans from the density gradient: the blended closed-loop field,
//! explicit-Euler rollouts, occupancy measurement and reference smoothing.

mod sweep;

pub use sweep::{
    max_deviation, max_turning_angle, sweep, CaseSummary, SweepCase, SweepReport, SweepRun,
};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{density_grad, smooth_step, DensityError, DensityParams};
use crate::env::{min_clearance, Environment, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("point ({x}, {y}) lies inside the unsafe set")]
    InsideUnsafe { x: f64, y: f64 },
    #[error("initial condition ({x}, {y}) lies inside the unsafe set")]
    InvalidStart { x: f64, y: f64 },
    #[error("moving-average window {window} exceeds {samples} samples")]
    WindowTooLarge { window: usize, samples: usize },
    #[error("moving-average window must be odd and positive, got {0}")]
    InvalidWindow(usize),
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Density(#[from] DensityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    pub dt: f64,
    pub convergence_eps: f64,
    pub max_steps: usize,
    #[serde(default = "one")]
    pub filter_beta: f64,
    #[serde(default = "one_usize")]
    pub filter_window: usize,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            convergence_eps: 0.01,
            max_steps: 200_000,
            filter_beta: 1.0,
            filter_window: 1,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(PlanError::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.max_steps < 1 {
            return Err(PlanError::InvalidConfig(
                "max_steps must be at least 1".into(),
            ));
        }
        if !(self.convergence_eps > 0.0) {
            return Err(PlanError::InvalidConfig(
                "convergence_eps must be positive".into(),
            ));
        }
        if !(self.filter_beta > 0.0 && self.filter_beta <= 1.0) {
            return Err(PlanError::InvalidConfig(format!(
                "filter_beta must lie in (0, 1], got {}",
                self.filter_beta
            )));
        }
        if self.filter_window == 0 || self.filter_window.is_multiple_of(2) {
            return Err(PlanError::InvalidWindow(self.filter_window));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalStatus {
    Converged,
    MaxSteps,
    EnteredUnsafe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Point,
    pub u: Vector2<f64>,
    pub clearance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<Sample>,
    pub terminal_status: TerminalStatus,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Each sample stands for one `dt` interval.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    pub fn steps(&self) -> usize {
        self.samples.len().saturating_sub(1)
    }

    pub fn min_clearance(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.clearance)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn path_length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].x - w[0].x).norm())
            .sum()
    }

    /// Recomputes clearance annotations against `env`.
    pub fn annotate_clearance(&mut self, env: &Environment) {
        for s in &mut self.samples {
            s.clearance = min_clearance(env, &s.x);
        }
    }

    /// Position and velocity at time `t` by linear interpolation, holding the
    /// end samples outside the covered interval.
    pub fn interpolate(&self, t: f64) -> (Point, Vector2<f64>) {
        let first = &self.samples[0];
        let last = &self.samples[self.samples.len() - 1];
        if t <= first.t {
            return (first.x, first.u);
        }
        if t >= last.t {
            return (last.x, last.u);
        }
        let pos = (t - first.t) / self.dt;
        let nearest = pos.round();
        if (pos - nearest).abs() < 1e-9 {
            let s = &self.samples[(nearest as usize).min(self.samples.len() - 1)];
            return (s.x, s.u);
        }
        let i = (pos.floor() as usize).min(self.samples.len() - 2);
        let w = pos - i as f64;
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        (a.x + (b.x - a.x) * w, a.u + (b.u - a.u) * w)
    }

    /// Linear-interpolation resampling onto a new uniform step, covering
    /// the original time span.
    pub fn resample(&self, dt: f64, env: &Environment) -> Trajectory {
        let t0 = self.samples[0].t;
        let span = self.samples[self.samples.len() - 1].t - t0;
        let n = (span / dt + 1e-9).floor() as usize + 1;
        let samples = (0..n)
            .map(|i| {
                let t = t0 + i as f64 * dt;
                let (x, u) = self.interpolate(t);
                Sample {
                    t,
                    x,
                    u,
                    clearance: min_clearance(env, &x),
                }
            })
            .collect();
        Trajectory {
            dt,
            samples,
            terminal_status: self.terminal_status,
        }
    }
}

/// Closed-loop velocity: `grad rho` away from the target, `-(x - target)`
/// inside the inner blend radius, and the smooth-step blend
/// `(1 - s) grad rho - s (x - target)` with
/// `s = smooth_step((R_out^2 - d^2) / (R_out^2 - R_in^2))` between.
pub fn feedback_velocity(
    env: &Environment,
    params: &DensityParams,
    x: &Point,
) -> Result<Vector2<f64>, PlanError> {
    if env.in_unsafe(x) {
        return Err(PlanError::InsideUnsafe { x: x.x, y: x.y });
    }
    let y = x - env.target();
    let d2 = y.norm_squared();
    let inner2 = params.blend_inner * params.blend_inner;
    let outer2 = params.blend_outer * params.blend_outer;
    if d2 <= inner2 {
        return Ok(-y);
    }
    let grad = density_grad(env, params, x)?.grad;
    if d2 >= outer2 {
        return Ok(grad);
    }
    let s = smooth_step((outer2 - d2) / (outer2 - inner2));
    Ok(grad * (1.0 - s) - y * s)
}

/// Explicit-Euler rollout of [`feedback_velocity`] from `x0`.
///
/// The rollout stops when the state comes within `convergence_eps` of the
/// target, after `max_steps` steps, or as soon as a step lands in the unsafe
/// set. In the last case the offending sample is recorded with zero velocity.
pub fn integrate_plan(
    env: &Environment,
    params: &DensityParams,
    cfg: &PlannerConfig,
    x0: &Point,
) -> Result<Trajectory, PlanError> {
    if env.in_unsafe(x0) {
        return Err(PlanError::InvalidStart { x: x0.x, y: x0.y });
    }
    let target = env.target();
    let mut samples = Vec::new();
    let mut x = *x0;
    let mut step = 0usize;
    let status = loop {
        let u = feedback_velocity(env, params, &x)?;
        samples.push(Sample {
            t: step as f64 * cfg.dt,
            x,
            u,
            clearance: min_clearance(env, &x),
        });
        if (x - target).norm() <= cfg.convergence_eps {
            break TerminalStatus::Converged;
        }
        if step == cfg.max_steps {
            break TerminalStatus::MaxSteps;
        }
        x += u * cfg.dt;
        step += 1;
        if env.in_unsafe(&x) {
            samples.push(Sample {
                t: step as f64 * cfg.dt,
                x,
                u: Vector2::zeros(),
                clearance: min_clearance(env, &x),
            });
            break TerminalStatus::EnteredUnsafe;
        }
    };
    Ok(Trajectory {
        dt: cfg.dt,
        samples,
        terminal_status: status,
    })
}

/// Time spent in the set described by `in_set`: `dt` times the number of
/// samples inside.
pub fn occupancy<F>(traj: &Trajectory, in_set: F) -> f64
where
    F: Fn(&Point) -> bool,
{
    traj.samples.iter().filter(|s| in_set(&s.x)).count() as f64 * traj.dt
}

/// Exponential smoothing `y_i = y_{i-1} + beta (x_i - y_{i-1})` of both the
/// positions and the velocity commands. Clearance annotations are copied
/// unchanged; call [`Trajectory::annotate_clearance`] to refresh them.
pub fn first_order_filter(traj: &Trajectory, beta: f64) -> Trajectory {
    let mut out = traj.clone();
    for i in 1..out.samples.len() {
        let prev = out.samples[i - 1];
        let s = &mut out.samples[i];
        s.x = prev.x + (s.x - prev.x) * beta;
        s.u = prev.u + (s.u - prev.u) * beta;
    }
    out
}

/// Centered moving average; the window shrinks symmetrically at both ends.
pub fn moving_average(traj: &Trajectory, window: usize) -> Result<Trajectory, PlanError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(PlanError::InvalidWindow(window));
    }
    let n = traj.samples.len();
    if window > n {
        return Err(PlanError::WindowTooLarge { window, samples: n });
    }
    let half = window / 2;
    let mut out = traj.clone();
    for (i, s) in out.samples.iter_mut().enumerate() {
        let h = half.min(i).min(n - 1 - i);
        let span = &traj.samples[i - h..=i + h];
        let k = span.len() as f64;
        s.x = span.iter().fold(Vector2::zeros(), |acc, q| acc + q.x) / k;
        s.u = span.iter().fold(Vector2::zeros(), |acc, q| acc + q.u) / k;
    }
    Ok(out)
}
