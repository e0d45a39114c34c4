//! CSV export and import, number formatting, and the JSON run report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector2;
use serde::Serialize;

use crate::density::DivergenceReport;
use crate::env::{min_clearance, Environment, Point};
use crate::planner::{CaseSummary, Sample, TerminalStatus, Trajectory};
use crate::tracker::TrackingResult;

pub const PLAN_HEADER: &str = "t,x,y,ux,uy,clearance";
pub const TRACK_HEADER: &str = "t,px,py,vx,vy,ux,uy,err";

/// Nine significant digits in the style of C's `%.9g`.
pub fn fmt_g9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt_g9(*v));
    }
    out.push('\n');
}

pub fn plan_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 * (traj.len() + 1));
    writeln!(out, "{PLAN_HEADER}").unwrap();
    for s in &traj.samples {
        row(&mut out, &[s.t, s.x.x, s.x.y, s.u.x, s.u.y, s.clearance]);
    }
    out
}

pub fn write_plan_csv(path: &Path, traj: &Trajectory) -> std::io::Result<()> {
    fs::write(path, plan_csv(traj))
}

pub fn tracking_csv(result: &TrackingResult, dt: f64) -> String {
    let mut out = String::with_capacity(96 * (result.states.len() + 1));
    writeln!(out, "{TRACK_HEADER}").unwrap();
    for (i, ((z, u), e)) in result
        .states
        .iter()
        .zip(&result.inputs)
        .zip(&result.errors)
        .enumerate()
    {
        row(
            &mut out,
            &[i as f64 * dt, z[0], z[1], z[2], z[3], u.x, u.y, *e],
        );
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },
}

/// Reads a plan CSV. The step is taken from the first two time stamps, or
/// `fallback_dt` for a single row; clearance is recomputed against `env`.
pub fn read_plan_csv(
    path: &Path,
    env: &Environment,
    fallback_dt: f64,
) -> Result<Trajectory, CsvError> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: name.clone(),
        source,
    })?;
    let fail = |line: usize, msg: String| CsvError::Format {
        path: name.clone(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == PLAN_HEADER => {}
        _ => return Err(fail(1, format!("expected header `{PLAN_HEADER}`"))),
    }
    let mut samples = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| fail(i + 1, e.to_string()))?;
        if vals.len() != 6 {
            return Err(fail(
                i + 1,
                format!("expected 6 columns, found {}", vals.len()),
            ));
        }
        let x = Point::new(vals[1], vals[2]);
        samples.push(Sample {
            t: vals[0],
            x,
            u: Vector2::new(vals[3], vals[4]),
            clearance: min_clearance(env, &x),
        });
    }
    if samples.is_empty() {
        return Err(fail(2, "no data rows".into()));
    }
    let dt = if samples.len() > 1 {
        samples[1].t - samples[0].t
    } else {
        fallback_dt
    };
    Ok(Trajectory {
        dt,
        samples,
        terminal_status: TerminalStatus::Converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheck {
    pub samples: usize,
    pub tolerance: f64,
    pub max_relative_error: f64,
    pub within_tolerance: usize,
    pub worst_point: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrfFootReport {
    pub foot: usize,
    pub in_contact: bool,
    pub force: [f64; 3],
    pub cone_feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrfReport {
    pub feet: Vec<GrfFootReport>,
    pub equilibrium_residual: f64,
    pub cone_feasible: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRunEntry {
    pub case: usize,
    pub label: String,
    pub x0: [f64; 2],
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_clearance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unsafe_occupancy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_turning_angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

/// Machine-readable summary of one command invocation.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub success: bool,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_clearance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unsafe_occupancy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rms_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resampled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unconverged_solves: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<DivergenceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_check: Option<GradientCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grf: Option<GrfReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<SweepRunEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cases: Vec<CaseSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub deviation: Vec<Vec<f64>>,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            ..Default::default()
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
