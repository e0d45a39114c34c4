//! Reduced-order tracking stack: a point-mass receding-horizon controller,
//! centroidal momentum rates, friction-pyramid force distribution, and the
//! single-leg kinematic and drive relations.

mod centroidal;
mod grf;
mod leg;
mod mpc;
mod power;

pub use centroidal::{centroidal_rate, Foot, Stance};
pub use grf::{distribute_grf, pyramid_feasible, wrench_residual, GrfSettings, GrfSolution};
pub use leg::{leg_accel_solve, pid_torque, TwoLinkLeg};
pub use mpc::{
    discretize_body, mpc_step, states_from_plan, track_reference, BodyState, LinearStep,
    MpcSolution, MpcSolver, TrackingResult,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error("no foot is in contact")]
    NoContacts,
    #[error("leg is at a kinematic singularity (|det J| = {det:e})")]
    SingularConfiguration { det: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid tracker configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyModel {
    /// kg
    pub mass: f64,
    /// s
    pub dt: f64,
    /// m/s^2, world frame
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

impl BodyModel {
    pub fn validate(&self) -> Result<(), TrackerError> {
        if !(self.mass > 0.0 && self.dt > 0.0) {
            return Err(TrackerError::InvalidConfig(format!(
                "mass and dt must be positive (mass={}, dt={})",
                self.mass, self.dt
            )));
        }
        Ok(())
    }
}

impl Default for BodyModel {
    fn default() -> Self {
        Self {
            mass: 12.0,
            dt: 0.1,
            gravity: default_gravity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerConfig {
    pub horizon: usize,
    /// Diagonal state weight on (px, py, vx, vy).
    pub q_weight: [f64; 4],
    /// Diagonal input weight on (ux, uy).
    pub k_weight: [f64; 2],
    /// Per-axis bound on |u|.
    pub u_max: [f64; 2],
    pub solver_tol: f64,
    pub solver_max_iters: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            q_weight: [200.0, 200.0, 20.0, 20.0],
            k_weight: [1e-3, 1e-3],
            u_max: [100.0, 100.0],
            solver_tol: 1e-8,
            solver_max_iters: 20_000,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        if self.horizon < 1 {
            return Err(TrackerError::InvalidConfig(
                "horizon must be at least 1".into(),
            ));
        }
        if self.k_weight.iter().any(|&k| !(k > 0.0)) {
            return Err(TrackerError::InvalidConfig(
                "k_weight entries must be positive".into(),
            ));
        }
        if self.q_weight.iter().any(|&q| !(q >= 0.0)) {
            return Err(TrackerError::InvalidConfig(
                "q_weight entries must be non-negative".into(),
            ));
        }
        if self.u_max.iter().any(|&u| !(u > 0.0)) {
            return Err(TrackerError::InvalidConfig(
                "u_max entries must be positive".into(),
            ));
        }
        if !(self.solver_tol > 0.0) || self.solver_max_iters == 0 {
            return Err(TrackerError::InvalidConfig(
                "solver_tol and solver_max_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}
