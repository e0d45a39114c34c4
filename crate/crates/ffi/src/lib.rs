//! C ABI for `density-planner`.
//!
//! Every fallible function returns a [`DpStatus`]; on failure a message is
//! stored per thread and can be fetched with [`dp_last_error_message`].
//! Environments and trajectories are opaque handles owned by the caller and
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use density_planner::config::load_config;
use density_planner::density::{density, density_grad, DensityError, DensityParams};
use density_planner::env::{validate_environment, Environment, Obstacle, Point, Workspace};
use density_planner::planner::{
    feedback_velocity, integrate_plan, PlanError, PlannerConfig, TerminalStatus, Trajectory,
};
use density_planner::tracker::{
    distribute_grf, leg_accel_solve, pid_torque, Foot, GrfSettings, Stance, TrackerError,
    TwoLinkLeg,
};
use nalgebra::{Vector2, Vector6};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Singularity = 3,
    InsideUnsafe = 4,
    NoContacts = 5,
    SingularConfiguration = 6,
    DimensionMismatch = 7,
    ConfigError = 8,
    OutOfRange = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpTerminalStatus {
    Converged = 0,
    MaxSteps = 1,
    EnteredUnsafe = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpDensityParams {
    pub alpha: f64,
    pub blend_inner: f64,
    pub blend_outer: f64,
    pub fd_step: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpPlannerConfig {
    pub dt: f64,
    pub convergence_eps: f64,
    pub max_steps: u64,
    pub filter_beta: f64,
    pub filter_window: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub ux: f64,
    pub uy: f64,
    pub clearance: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpFoot {
    pub position: [f64; 3],
    pub in_contact: bool,
}

/// Opaque environment handle.
pub struct DpEnvironment {
    env: Environment,
}

/// Opaque trajectory handle.
pub struct DpTrajectory {
    traj: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: DpStatus, msg: impl Into<String>) -> DpStatus {
    set_error(msg);
    status
}

fn guard<F: FnOnce() -> DpStatus>(f: F) -> DpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == DpStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(DpStatus::Panic, "internal panic"),
    }
}

fn density_status(e: &DensityError) -> DpStatus {
    match e {
        DensityError::Singularity { .. } => DpStatus::Singularity,
        DensityError::InvalidParams(_) => DpStatus::InvalidArgument,
    }
}

fn plan_status(e: &PlanError) -> DpStatus {
    match e {
        PlanError::InsideUnsafe { .. } | PlanError::InvalidStart { .. } => DpStatus::InsideUnsafe,
        PlanError::Density(d) => density_status(d),
        _ => DpStatus::InvalidArgument,
    }
}

fn tracker_status(e: &TrackerError) -> DpStatus {
    match e {
        TrackerError::NoContacts => DpStatus::NoContacts,
        TrackerError::SingularConfiguration { .. } => DpStatus::SingularConfiguration,
        TrackerError::DimensionMismatch(_) => DpStatus::DimensionMismatch,
        TrackerError::InvalidConfig(_) => DpStatus::InvalidArgument,
    }
}

impl From<&DpDensityParams> for DensityParams {
    fn from(p: &DpDensityParams) -> Self {
        Self {
            alpha: p.alpha,
            blend_inner: p.blend_inner,
            blend_outer: p.blend_outer,
            fd_step: p.fd_step,
        }
    }
}

impl From<&DpPlannerConfig> for PlannerConfig {
    fn from(c: &DpPlannerConfig) -> Self {
        Self {
            dt: c.dt,
            convergence_eps: c.convergence_eps,
            max_steps: c.max_steps as usize,
            filter_beta: c.filter_beta,
            filter_window: c.filter_window as usize,
        }
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

#[no_mangle]
pub extern "C" fn dp_density_params_default() -> DpDensityParams {
    let p = DensityParams::default();
    DpDensityParams {
        alpha: p.alpha,
        blend_inner: p.blend_inner,
        blend_outer: p.blend_outer,
        fd_step: p.fd_step,
    }
}

#[no_mangle]
pub extern "C" fn dp_planner_config_default() -> DpPlannerConfig {
    let c = PlannerConfig::default();
    DpPlannerConfig {
        dt: c.dt,
        convergence_eps: c.convergence_eps,
        max_steps: c.max_steps as u64,
        filter_beta: c.filter_beta,
        filter_window: c.filter_window as u64,
    }
}

/// Creates an obstacle-free environment.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_environment_new(
    xmin: f64,
    ymin: f64,
    xmax: f64,
    ymax: f64,
    target_x: f64,
    target_y: f64,
    out: *mut *mut DpEnvironment,
) -> DpStatus {
    guard(|| {
        if out.is_null() {
            return fail(DpStatus::NullPointer, "out is null");
        }
        let env = Environment::new(
            Workspace::new([xmin, ymin], [xmax, ymax]),
            [target_x, target_y],
            vec![],
        );
        *out = Box::into_raw(Box::new(DpEnvironment { env }));
        DpStatus::Ok
    })
}

/// Loads the environment section of a TOML config; `params` and `cfg`, when
/// non-null, receive the density and planner sections.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer; `params`
/// and `cfg` null or valid.
#[no_mangle]
pub unsafe extern "C" fn dp_environment_from_config(
    path: *const c_char,
    out: *mut *mut DpEnvironment,
    params: *mut DpDensityParams,
    cfg: *mut DpPlannerConfig,
) -> DpStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(DpStatus::NullPointer, "path or out is null");
        }
        let Ok(p) = CStr::from_ptr(path).to_str() else {
            return fail(DpStatus::InvalidArgument, "path is not UTF-8");
        };
        let config = match load_config(p.as_ref()) {
            Ok(c) => c,
            Err(e) => return fail(DpStatus::ConfigError, e.to_string()),
        };
        if !params.is_null() {
            let d = &config.density;
            *params = DpDensityParams {
                alpha: d.alpha,
                blend_inner: d.blend_inner,
                blend_outer: d.blend_outer,
                fd_step: d.fd_step,
            };
        }
        if !cfg.is_null() {
            let c = &config.planner;
            *cfg = DpPlannerConfig {
                dt: c.dt,
                convergence_eps: c.convergence_eps,
                max_steps: c.max_steps as u64,
                filter_beta: c.filter_beta,
                filter_window: c.filter_window as u64,
            };
        }
        *out = Box::into_raw(Box::new(DpEnvironment {
            env: config.environment,
        }));
        DpStatus::Ok
    })
}

/// # Safety
/// `env` must be a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn dp_environment_add_obstacle(
    env: *mut DpEnvironment,
    center_x: f64,
    center_y: f64,
    radius_unsafe: f64,
    radius_sense: f64,
) -> DpStatus {
    guard(|| {
        let Some(env) = env.as_mut() else {
            return fail(DpStatus::NullPointer, "env is null");
        };
        env.env.obstacles.push(Obstacle::new(
            [center_x, center_y],
            radius_unsafe,
            radius_sense,
        ));
        DpStatus::Ok
    })
}

/// Returns `Ok` for a well-formed environment, `InvalidArgument` otherwise.
///
/// # Safety
/// `env` must be a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn dp_environment_validate(env: *const DpEnvironment) -> DpStatus {
    guard(|| {
        let Some(env) = env.as_ref() else {
            return fail(DpStatus::NullPointer, "env is null");
        };
        let report = validate_environment(&env.env);
        if report.is_ok() {
            DpStatus::Ok
        } else {
            fail(DpStatus::InvalidArgument, report.to_string())
        }
    })
}

/// # Safety
/// `env` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dp_environment_free(env: *mut DpEnvironment) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dp_density(
    env: *const DpEnvironment,
    params: *const DpDensityParams,
    x: f64,
    y: f64,
    out: *mut f64,
) -> DpStatus {
    guard(|| {
        let (Some(env), Some(params)) = (env.as_ref(), params.as_ref()) else {
            return fail(DpStatus::NullPointer, "env or params is null");
        };
        if out.is_null() {
            return fail(DpStatus::NullPointer, "out is null");
        }
        match density(&env.env, &params.into(), &Point::new(x, y)) {
            Ok(v) => {
                *out = v;
                DpStatus::Ok
            }
            Err(e) => fail(density_status(&e), e.to_string()),
        }
    })
}

/// Writes the analytic gradient to `out[0..2]`. Inside an unsafe ball the
/// gradient is zero and `inside_unsafe` (if non-null) is set.
///
/// # Safety
/// `out` must hold two doubles; other pointers valid or, for
/// `inside_unsafe`, null.
#[no_mangle]
pub unsafe extern "C" fn dp_density_grad(
    env: *const DpEnvironment,
    params: *const DpDensityParams,
    x: f64,
    y: f64,
    out: *mut f64,
    inside_unsafe: *mut bool,
) -> DpStatus {
    guard(|| {
        let (Some(env), Some(params)) = (env.as_ref(), params.as_ref()) else {
            return fail(DpStatus::NullPointer, "env or params is null");
        };
        if out.is_null() {
            return fail(DpStatus::NullPointer, "out is null");
        }
        match density_grad(&env.env, &params.into(), &Point::new(x, y)) {
            Ok(g) => {
                *out = g.grad.x;
                *out.add(1) = g.grad.y;
                if !inside_unsafe.is_null() {
                    *inside_unsafe = g.inside_unsafe;
                }
                DpStatus::Ok
            }
            Err(e) => fail(density_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `out` must hold two doubles; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn dp_feedback_velocity(
    env: *const DpEnvironment,
    params: *const DpDensityParams,
    x: f64,
    y: f64,
    out: *mut f64,
) -> DpStatus {
    guard(|| {
        let (Some(env), Some(params)) = (env.as_ref(), params.as_ref()) else {
            return fail(DpStatus::NullPointer, "env or params is null");
        };
        if out.is_null() {
            return fail(DpStatus::NullPointer, "out is null");
        }
        match feedback_velocity(&env.env, &params.into(), &Point::new(x, y)) {
            Ok(v) => {
                *out = v.x;
                *out.add(1) = v.y;
                DpStatus::Ok
            }
            Err(e) => fail(plan_status(&e), e.to_string()),
        }
    })
}

/// Integrates the feedback plan from `(x0, y0)`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dp_plan(
    env: *const DpEnvironment,
    params: *const DpDensityParams,
    cfg: *const DpPlannerConfig,
    x0: f64,
    y0: f64,
    out: *mut *mut DpTrajectory,
) -> DpStatus {
    guard(|| {
        let (Some(env), Some(params), Some(cfg)) = (env.as_ref(), params.as_ref(), cfg.as_ref())
        else {
            return fail(DpStatus::NullPointer, "env, params or cfg is null");
        };
        if out.is_null() {
            return fail(DpStatus::NullPointer, "out is null");
        }
        match integrate_plan(&env.env, &params.into(), &cfg.into(), &Point::new(x0, y0)) {
            Ok(traj) => {
                *out = Box::into_raw(Box::new(DpTrajectory { traj }));
                DpStatus::Ok
            }
            Err(e) => fail(plan_status(&e), e.to_string()),
        }
    })
}

/// Number of samples; 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn dp_trajectory_len(traj: *const DpTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.traj.len())
}

/// # Safety
/// `traj` must be a handle from this library; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dp_trajectory_status(
    traj: *const DpTrajectory,
    out: *mut DpTerminalStatus,
) -> DpStatus {
    guard(|| {
        let Some(t) = traj.as_ref() else {
            return fail(DpStatus::NullPointer, "traj is null");
        };
        if out.is_null() {
            return fail(DpStatus::NullPointer, "out is null");
        }
        *out = match t.traj.terminal_status {
            TerminalStatus::Converged => DpTerminalStatus::Converged,
            TerminalStatus::MaxSteps => DpTerminalStatus::MaxSteps,
            TerminalStatus::EnteredUnsafe => DpTerminalStatus::EnteredUnsafe,
        };
        DpStatus::Ok
    })
}

/// # Safety
/// `traj` must be a handle from this library; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dp_trajectory_sample(
    traj: *const DpTrajectory,
    index: usize,
    out: *mut DpSample,
) -> DpStatus {
    guard(|| {
        let Some(t) = traj.as_ref() else {
            return fail(DpStatus::NullPointer, "traj is null");
        };
        if out.is_null() {
            return fail(DpStatus::NullPointer, "out is null");
        }
        let Some(s) = t.traj.samples.get(index) else {
            return fail(DpStatus::OutOfRange, format!("index {index} out of range"));
        };
        *out = DpSample {
            t: s.t,
            x: s.x.x,
            y: s.x.y,
            ux: s.u.x,
            uy: s.u.y,
            clearance: s.clearance,
        };
        DpStatus::Ok
    })
}

/// # Safety
/// `traj` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dp_trajectory_free(traj: *mut DpTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Distributes `wrench[0..6]` over `n_feet` feet; `out_forces` receives
/// `3 * n_feet` doubles and `out_residual` (if non-null) the equilibrium
/// residual.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn dp_grf_distribute(
    feet: *const DpFoot,
    n_feet: usize,
    friction_mu: f64,
    wrench: *const f64,
    out_forces: *mut f64,
    out_residual: *mut f64,
) -> DpStatus {
    guard(|| {
        if feet.is_null() || wrench.is_null() || out_forces.is_null() {
            return fail(DpStatus::NullPointer, "feet, wrench or out_forces is null");
        }
        let stance = Stance {
            feet: std::slice::from_raw_parts(feet, n_feet)
                .iter()
                .map(|f| Foot::new(f.position, f.in_contact))
                .collect(),
            friction_mu,
        };
        let w = Vector6::from_column_slice(std::slice::from_raw_parts(wrench, 6));
        match distribute_grf(&stance, &w, &GrfSettings::default()) {
            Ok(sol) => {
                let out = std::slice::from_raw_parts_mut(out_forces, 3 * n_feet);
                for (i, f) in sol.forces.iter().enumerate() {
                    out[3 * i..3 * i + 3].copy_from_slice(f.as_slice());
                }
                if !out_residual.is_null() {
                    *out_residual = sol.equilibrium_residual;
                }
                DpStatus::Ok
            }
            Err(e) => fail(tracker_status(&e), e.to_string()),
        }
    })
}

/// Joint accelerations of a planar two-link leg realizing the foot
/// acceleration `(ax, ay)`; written to `out[0..2]`.
///
/// # Safety
/// `out` must hold two doubles.
#[no_mangle]
pub unsafe extern "C" fn dp_leg_accel_solve(
    l1: f64,
    l2: f64,
    q1: f64,
    q2: f64,
    qd1: f64,
    qd2: f64,
    ax: f64,
    ay: f64,
    out: *mut f64,
) -> DpStatus {
    guard(|| {
        if out.is_null() {
            return fail(DpStatus::NullPointer, "out is null");
        }
        let leg = TwoLinkLeg::new([l1, l2], Vector2::new(q1, q2), Vector2::new(qd1, qd2));
        match leg_accel_solve(&leg, &Vector2::new(ax, ay)) {
            Ok(qdd) => {
                *out = qdd.x;
                *out.add(1) = qdd.y;
                DpStatus::Ok
            }
            Err(e) => fail(tracker_status(&e), e.to_string()),
        }
    })
}

/// PID drive law over `n` joints; every array holds `n` doubles.
///
/// # Safety
/// All pointers must be valid for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn dp_pid_torque(
    n: usize,
    tau_ff: *const f64,
    q_star: *const f64,
    qd_star: *const f64,
    q: *const f64,
    qd: *const f64,
    kp: *const f64,
    kd: *const f64,
    out: *mut f64,
) -> DpStatus {
    guard(|| {
        let ins = [tau_ff, q_star, qd_star, q, qd, kp, kd];
        if ins.iter().any(|p| p.is_null()) || out.is_null() {
            return fail(DpStatus::NullPointer, "null array");
        }
        let s: Vec<&[f64]> = ins
            .iter()
            .map(|&p| std::slice::from_raw_parts(p, n))
            .collect();
        match pid_torque(s[0], s[1], s[2], s[3], s[4], s[5], s[6]) {
            Ok(tau) => {
                std::slice::from_raw_parts_mut(out, n).copy_from_slice(&tau);
                DpStatus::Ok
            }
            Err(e) => fail(tracker_status(&e), e.to_string()),
        }
    })
}
