use rayon::prelude::*;
use serde::Serialize;

use super::{integrate_plan, occupancy, PlanError, PlannerConfig, TerminalStatus, Trajectory};
use crate::density::DensityParams;
use crate::env::{Environment, Point};

/// One fully resolved configuration of a parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCase {
    pub label: String,
    pub env: Environment,
    pub params: DensityParams,
    pub cfg: PlannerConfig,
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub case: usize,
    pub x0_index: usize,
    pub x0: Point,
    pub outcome: Result<Trajectory, PlanError>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseSummary {
    pub label: String,
    pub runs: usize,
    pub converged: usize,
    pub convergence_rate: f64,
    pub min_clearance: f64,
    pub unsafe_occupancy: f64,
    pub max_turning_angle: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub runs: Vec<SweepRun>,
    pub summaries: Vec<CaseSummary>,
    /// `deviation[i][j]`: largest time-aligned position gap between the
    /// trajectories of cases `i` and `j`, maximized over initial conditions.
    /// NaN when no pair of runs succeeded.
    pub deviation: Vec<Vec<f64>>,
}

impl SweepReport {
    pub fn trajectory(&self, case: usize, x0_index: usize) -> Option<&Trajectory> {
        self.runs
            .iter()
            .find(|r| r.case == case && r.x0_index == x0_index)
            .and_then(|r| r.outcome.as_ref().ok())
    }
}

/// Largest angle (radians) between consecutive non-zero velocity samples.
pub fn max_turning_angle(traj: &Trajectory) -> f64 {
    traj.samples
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (w[0].u, w[1].u);
            if a.norm() <= 1e-12 || b.norm() <= 1e-12 {
                return None;
            }
            let cross = a.x * b.y - a.y * b.x;
            Some(cross.abs().atan2(a.dot(&b)))
        })
        .fold(0.0, f64::max)
}

/// Largest position gap between two trajectories compared at equal times,
/// each held at its final state once it ends.
pub fn max_deviation(a: &Trajectory, b: &Trajectory) -> f64 {
    let mut worst: f64 = 0.0;
    for s in &a.samples {
        worst = worst.max((s.x - b.interpolate(s.t).0).norm());
    }
    for s in &b.samples {
        worst = worst.max((s.x - a.interpolate(s.t).0).norm());
    }
    worst
}

/// Runs every case from every initial condition. Runs are independent and
/// execute on the rayon pool; the report is ordered by (case, x0).
pub fn sweep(cases: &[SweepCase], x0s: &[Point]) -> SweepReport {
    let jobs: Vec<(usize, usize)> = (0..cases.len())
        .flat_map(|c| (0..x0s.len()).map(move |i| (c, i)))
        .collect();
    let runs: Vec<SweepRun> = jobs
        .par_iter()
        .map(|&(c, i)| {
            let case = &cases[c];
            SweepRun {
                case: c,
                x0_index: i,
                x0: x0s[i],
                outcome: integrate_plan(&case.env, &case.params, &case.cfg, &x0s[i]),
            }
        })
        .collect();

    let summaries = cases
        .iter()
        .enumerate()
        .map(|(c, case)| {
            let mine: Vec<&SweepRun> = runs.iter().filter(|r| r.case == c).collect();
            let ok: Vec<&Trajectory> = mine
                .iter()
                .filter_map(|r| r.outcome.as_ref().ok())
                .collect();
            let converged = ok
                .iter()
                .filter(|t| t.terminal_status == TerminalStatus::Converged)
                .count();
            CaseSummary {
                label: case.label.clone(),
                runs: mine.len(),
                converged,
                convergence_rate: if mine.is_empty() {
                    0.0
                } else {
                    converged as f64 / mine.len() as f64
                },
                min_clearance: ok
                    .iter()
                    .map(|t| t.min_clearance())
                    .fold(f64::INFINITY, f64::min),
                unsafe_occupancy: ok
                    .iter()
                    .map(|t| occupancy(t, |p| case.env.in_unsafe(p)))
                    .sum(),
                max_turning_angle: ok.iter().map(|t| max_turning_angle(t)).fold(0.0, f64::max),
            }
        })
        .collect();

    let n = cases.len();
    let mut deviation = vec![vec![f64::NAN; n]; n];
    for i in 0..n {
        for j in i..n {
            let mut worst = f64::NAN;
            for k in 0..x0s.len() {
                let a = runs[i * x0s.len() + k].outcome.as_ref();
                let b = runs[j * x0s.len() + k].outcome.as_ref();
                if let (Ok(a), Ok(b)) = (a, b) {
                    let d = if i == j { 0.0 } else { max_deviation(a, b) };
                    worst = if worst.is_nan() { d } else { worst.max(d) };
                }
            }
            deviation[i][j] = worst;
            deviation[j][i] = worst;
        }
    }

    SweepReport {
        runs,
        summaries,
        deviation,
    }
}
