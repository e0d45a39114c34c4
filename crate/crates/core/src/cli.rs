//! Subcommand implementations behind the `density-planner` binary.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector6;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::density::{check_divergence, density_grad, divergence_sample_admissible};
use crate::env::{Environment, Point};
use crate::io::{
    plan_csv, read_plan_csv, tracking_csv, CsvError, GradientCheck, GrfFootReport, GrfReport,
    RunReport, SweepRunEntry,
};
use crate::planner::{
    first_order_filter, integrate_plan, max_turning_angle, moving_average, occupancy, sweep,
    PlanError, TerminalStatus, Trajectory,
};
use crate::tracker::{distribute_grf, states_from_plan, track_reference, TrackerError};

/// Tolerance of the gradient cross-check reported by `verify`.
pub const GRADIENT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error("no samples: grid spacing {0} leaves no admissible point")]
    NoSamples(f64),
    #[error(
        "plan step {plan_dt} differs from tracker dt {tracker_dt}; pass --resample to interpolate"
    )]
    DtMismatch { plan_dt: f64, tracker_dt: f64 },
}

impl CliError {
    /// Process exit status: 2 for configuration and usage problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn finish(mut report: RunReport, out_dir: &Path, name: &str) -> Result<RunReport, CliError> {
    let path = out_dir.join(name);
    report.artifacts.push(path.display().to_string());
    write_file(&path, &report.to_json())?;
    Ok(report)
}

fn status_name(status: TerminalStatus) -> String {
    format!("{status:?}")
}

fn unsafe_occupancy(env: &Environment, traj: &Trajectory) -> f64 {
    occupancy(traj, |x| env.in_unsafe(x))
}

/// Integrates the plan from `x0`, writing `plan.csv` (plus filtered or
/// smoothed copies when the planner config asks for them) and `report.json`.
/// Planner errors such as an unsafe start are recorded in the report.
pub fn cmd_plan(cfg: &Config, x0: Point, out_dir: &Path) -> Result<RunReport, CliError> {
    ensure_dir(out_dir)?;
    let env = &cfg.environment;
    let mut report = RunReport::new("plan");
    report.x0 = Some([x0.x, x0.y]);
    let traj = match integrate_plan(env, &cfg.density, &cfg.planner, &x0) {
        Ok(t) => t,
        Err(e) => {
            report.status = match e {
                PlanError::InvalidStart { .. } => "InvalidStart".into(),
                _ => "Error".into(),
            };
            report.message = Some(e.to_string());
            return finish(report, out_dir, "report.json");
        }
    };
    let path = out_dir.join("plan.csv");
    write_file(&path, &plan_csv(&traj))?;
    report.artifacts.push(path.display().to_string());
    if cfg.planner.filter_beta < 1.0 {
        let path = out_dir.join("plan_filtered.csv");
        write_file(
            &path,
            &plan_csv(&first_order_filter(&traj, cfg.planner.filter_beta)),
        )?;
        report.artifacts.push(path.display().to_string());
    }
    if cfg.planner.filter_window > 1 {
        let path = out_dir.join("plan_smoothed.csv");
        match moving_average(&traj, cfg.planner.filter_window) {
            Ok(smooth) => {
                write_file(&path, &plan_csv(&smooth))?;
                report.artifacts.push(path.display().to_string());
            }
            Err(e) => report.message = Some(format!("smoothing skipped: {e}")),
        }
    }
    report.success = traj.terminal_status == TerminalStatus::Converged;
    report.status = status_name(traj.terminal_status);
    report.steps = Some(traj.steps());
    report.duration = Some(traj.duration());
    report.min_clearance = Some(traj.min_clearance());
    report.unsafe_occupancy = Some(unsafe_occupancy(env, &traj));
    report.path_length = Some(traj.path_length());
    finish(report, out_dir, "report.json")
}

/// Runs every sweep case from every initial condition. Each run gets its own
/// CSV; the aggregate report carries per-case summaries and the pairwise
/// deviation matrix between cases.
pub fn cmd_sweep(cfg: &Config, seed: u64, out_dir: &Path) -> Result<RunReport, CliError> {
    if cfg.sweep.is_empty() {
        return Err(CliError::Usage(
            "sweep axes are empty; add at least one [[sweep]] table".into(),
        ));
    }
    let x0s = initial_points(cfg, seed);
    if x0s.is_empty() {
        return Err(CliError::Usage(
            "sweep needs initial conditions in [initial]".into(),
        ));
    }
    ensure_dir(out_dir)?;
    let cases = cfg.sweep_cases();
    let result = sweep(&cases, &x0s);
    let mut report = RunReport::new("sweep");
    report.seed = Some(seed);
    let written: Vec<Result<Option<String>, CliError>> = result
        .runs
        .par_iter()
        .map(|run| {
            let Ok(traj) = &run.outcome else {
                return Ok(None);
            };
            let path = out_dir.join(format!("run_c{:03}_x{:03}.csv", run.case, run.x0_index));
            write_file(&path, &plan_csv(traj))?;
            Ok(Some(path.display().to_string()))
        })
        .collect();
    let mut all_converged = true;
    for (run, csv) in result.runs.iter().zip(written) {
        let csv = csv?;
        let case = &cases[run.case];
        let mut entry = SweepRunEntry {
            case: run.case,
            label: case.label.clone(),
            x0: [run.x0.x, run.x0.y],
            status: String::new(),
            steps: None,
            min_clearance: None,
            unsafe_occupancy: None,
            max_turning_angle: None,
            csv: csv.clone(),
        };
        match &run.outcome {
            Ok(traj) => {
                all_converged &= traj.terminal_status == TerminalStatus::Converged;
                entry.status = status_name(traj.terminal_status);
                entry.steps = Some(traj.steps());
                entry.min_clearance = Some(traj.min_clearance());
                entry.unsafe_occupancy = Some(unsafe_occupancy(&case.env, traj));
                entry.max_turning_angle = Some(max_turning_angle(traj));
            }
            Err(e) => {
                all_converged = false;
                entry.status = format!("Error: {e}");
            }
        }
        report.artifacts.extend(csv);
        report.runs.push(entry);
    }
    report.success = all_converged;
    report.status = if all_converged {
        "Converged".into()
    } else {
        "Incomplete".into()
    };
    report.cases = result.summaries;
    report.deviation = result.deviation;
    finish(report, out_dir, "sweep_report.json")
}

/// Explicit initial points followed by seeded samples from the region.
pub fn initial_points(cfg: &Config, seed: u64) -> Vec<Point> {
    cfg.initial
        .as_ref()
        .map(|i| i.sample(seed))
        .unwrap_or_default()
}

/// Seed for sampling: the command-line override, else the config value.
pub fn effective_seed(cfg: &Config, cli_seed: Option<u64>) -> u64 {
    cli_seed
        .or_else(|| cfg.initial.as_ref().map(|i| i.seed))
        .unwrap_or(0)
}

/// Relative error between the analytic gradient and its central-difference
/// counterpart; zero when both vanish.
pub fn gradient_relative_error(cfg: &Config, x: &Point) -> Option<f64> {
    let env = &cfg.environment;
    let g = density_grad(env, &cfg.density, x).ok()?.grad;
    let fd = crate::density::density_grad_fd(env, &cfg.density, x).ok()?;
    let scale = g.norm();
    let diff = (g - fd).norm();
    Some(if diff == 0.0 { 0.0 } else { diff / scale })
}

/// Divergence certificate on a grid plus the gradient cross-check on the
/// same admissible nodes.
pub fn cmd_verify(cfg: &Config, grid_spacing: f64, out_dir: &Path) -> Result<RunReport, CliError> {
    let env = &cfg.environment;
    let div = check_divergence(env, &cfg.density, grid_spacing);
    if div.samples_total == 0 {
        return Err(CliError::NoSamples(grid_spacing));
    }
    ensure_dir(out_dir)?;
    let ws = &env.workspace;
    let nx = (ws.width() / grid_spacing).floor() as usize;
    let ny = (ws.height() / grid_spacing).floor() as usize;
    let collar = 2.0 * grid_spacing;
    let errors: Vec<(Point, f64)> = (0..=nx)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..=ny).filter_map(move |j| {
                let x = Point::new(
                    ws.min[0] + i as f64 * grid_spacing,
                    ws.min[1] + j as f64 * grid_spacing,
                );
                if !divergence_sample_admissible(env, &cfg.density, &x, collar) || env.in_unsafe(&x)
                {
                    return None;
                }
                gradient_relative_error(cfg, &x).map(|e| (x, e))
            })
        })
        .collect();
    let (worst, max_err) = errors.iter().fold(
        (Point::new(f64::NAN, f64::NAN), 0.0f64),
        |(wp, we), &(p, e)| if e > we { (p, e) } else { (wp, we) },
    );
    let check = GradientCheck {
        samples: errors.len(),
        tolerance: GRADIENT_TOL,
        max_relative_error: max_err,
        within_tolerance: errors.iter().filter(|(_, e)| *e <= GRADIENT_TOL).count(),
        worst_point: [worst.x, worst.y],
    };
    let mut report = RunReport::new("verify");
    report.success = true;
    report.status = "Done".into();
    report.divergence = Some(div);
    report.gradient_check = Some(check);
    finish(report, out_dir, "verify_report.json")
}

/// Tracks a plan CSV with the point-mass controller. The plan step must
/// equal the tracker step unless `resample` is set.
pub fn cmd_track(
    cfg: &Config,
    plan_path: &Path,
    resample: bool,
    out_dir: &Path,
) -> Result<RunReport, CliError> {
    let model = &cfg.tracker.body;
    let plan = read_plan_csv(plan_path, &cfg.environment, model.dt)?;
    let matches = (plan.dt - model.dt).abs() <= 1e-9 * model.dt.max(1.0);
    let plan = match (matches, resample) {
        (true, _) => plan,
        (false, true) => plan.resample(model.dt, &cfg.environment),
        (false, false) => {
            return Err(CliError::DtMismatch {
                plan_dt: plan.dt,
                tracker_dt: model.dt,
            })
        }
    };
    ensure_dir(out_dir)?;
    let reference = states_from_plan(&plan);
    let result = track_reference(model, &cfg.tracker.mpc, &reference[0], &reference)?;
    let path = out_dir.join("track.csv");
    write_file(&path, &tracking_csv(&result, model.dt))?;
    let mut report = RunReport::new("track");
    report.artifacts.push(path.display().to_string());
    report.success = true;
    report.status = "Tracked".into();
    report.steps = Some(reference.len());
    report.rms_error = Some(result.rms_error);
    report.path_length = Some(plan.path_length());
    report.resampled = Some(!matches);
    report.unconverged_solves = Some(result.unconverged_steps);
    finish(report, out_dir, "track_report.json")
}

/// Distributes the configured (or overriding) wrench over the stance.
pub fn cmd_grf(
    cfg: &Config,
    wrench: Option<[f64; 6]>,
    out_dir: &Path,
) -> Result<RunReport, CliError> {
    let Some(grf) = &cfg.grf else {
        return Err(CliError::Usage("config has no [grf] section".into()));
    };
    let w = Vector6::from(wrench.unwrap_or(grf.wrench));
    let sol = distribute_grf(&grf.stance, &w, &grf.settings)?;
    ensure_dir(out_dir)?;
    let mu = grf.stance.friction_mu;
    let feet = grf
        .stance
        .feet
        .iter()
        .zip(&sol.forces)
        .enumerate()
        .map(|(i, (foot, f))| GrfFootReport {
            foot: i,
            in_contact: foot.in_contact,
            force: [f.x, f.y, f.z],
            cone_feasible: crate::tracker::pyramid_feasible(f, mu),
        })
        .collect();
    let mut report = RunReport::new("grf");
    report.success = true;
    report.status = "Solved".into();
    report.grf = Some(GrfReport {
        feet,
        equilibrium_residual: sol.equilibrium_residual,
        cone_feasible: sol.cone_feasible,
        iterations: sol.iterations,
    });
    finish(report, out_dir, "grf_report.json")
}

/// Default output directory for a subcommand.
pub fn default_out(command: &str) -> PathBuf {
    PathBuf::from("out").join(command)
}
