use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use density_planner::cli::{
    cmd_grf, cmd_plan, cmd_sweep, cmd_track, cmd_verify, default_out, effective_seed,
    initial_points, CliError,
};
use density_planner::config::load_config;
use density_planner::env::Point;
use density_planner::io::RunReport;

#[derive(Parser)]
#[command(
    name = "density-planner",
    version,
    about = "Density-function feedback planning and tracking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: out/<command>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for sampled initial conditions (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the feedback plan from one initial condition
    Plan {
        #[command(flatten)]
        common: Common,
        /// Initial condition `x,y` (default: first configured initial point)
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        x0: Option<[f64; 2]>,
    },
    /// Run the cross product of the sweep axes
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Sample the divergence certificate and cross-check the gradient
    Verify {
        #[command(flatten)]
        common: Common,
        /// Grid spacing in workspace units
        #[arg(long, default_value_t = 0.05)]
        grid: f64,
    },
    /// Track a plan CSV with the point-mass controller
    Track {
        #[command(flatten)]
        common: Common,
        /// Plan CSV produced by `plan` or `sweep`
        #[arg(long)]
        plan: PathBuf,
        /// Interpolate the plan onto the tracker step if they differ
        #[arg(long)]
        resample: bool,
    },
    /// Distribute a body wrench over the configured stance
    Grf {
        #[command(flatten)]
        common: Common,
        /// Wrench `fx,fy,fz,mx,my,mz` (default: from the config)
        #[arg(long, value_parser = parse_wrench, allow_hyphen_values = true)]
        wrench: Option<[f64; 6]>,
    },
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<Result<_, _>>()?;
    vals.try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    parse_floats::<2>(s)
}

fn parse_wrench(s: &str) -> Result<[f64; 6], String> {
    parse_floats::<6>(s)
}

fn out_dir(common: &Common, command: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| default_out(command))
}

fn print_summary(report: &RunReport) {
    println!("{}: {}", report.command, report.status);
    if let Some(m) = &report.message {
        println!("  {m}");
    }
    if let Some(seed) = report.seed {
        println!("  seed: {seed}");
    }
    if let (Some(steps), Some(c), Some(o)) =
        (report.steps, report.min_clearance, report.unsafe_occupancy)
    {
        println!("  steps: {steps}  min clearance: {c:.6}  unsafe occupancy: {o}");
    }
    if let Some(rms) = report.rms_error {
        println!(
            "  rms error: {rms:.6e}  steps: {}",
            report.steps.unwrap_or(0)
        );
    }
    if let Some(d) = &report.divergence {
        println!(
            "  divergence: {}/{} positive ({:.5}), min {:.4e} at ({}, {})",
            d.samples_positive,
            d.samples_total,
            d.positive_fraction(),
            d.min_value,
            d.worst_point[0],
            d.worst_point[1]
        );
    }
    if let Some(g) = &report.gradient_check {
        println!(
            "  gradient check: max relative error {:.3e}, {}/{} within {:e}",
            g.max_relative_error, g.within_tolerance, g.samples, g.tolerance
        );
    }
    if let Some(grf) = &report.grf {
        for f in &grf.feet {
            println!(
                "  foot {}: [{:.6}, {:.6}, {:.6}]{}",
                f.foot,
                f.force[0],
                f.force[1],
                f.force[2],
                if f.in_contact { "" } else { " (swing)" }
            );
        }
        println!(
            "  residual: {:.3e}  cone feasible: {}",
            grf.equilibrium_residual, grf.cone_feasible
        );
    }
    for c in &report.cases {
        println!(
            "  {}: {}/{} converged, min clearance {:.4}, max turning angle {:.4e}",
            c.label, c.converged, c.runs, c.min_clearance, c.max_turning_angle
        );
    }
    if !report.deviation.is_empty() {
        println!("  deviation matrix:");
        for row in &report.deviation {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
            println!("    [{}]", cells.join(", "));
        }
    }
    for a in &report.artifacts {
        println!("  wrote {a}");
    }
}

fn run(cli: Cli) -> Result<RunReport, CliError> {
    let load = |p: &Path| load_config(p).map_err(CliError::from);
    match cli.command {
        Command::Plan { common, x0 } => {
            let cfg = load(&common.config)?;
            let seed = effective_seed(&cfg, common.seed);
            let x0 = match x0 {
                Some(p) => Point::new(p[0], p[1]),
                None => *initial_points(&cfg, seed).first().ok_or_else(|| {
                    CliError::Usage("no --x0 given and no initial point configured".into())
                })?,
            };
            cmd_plan(&cfg, x0, &out_dir(&common, "plan"))
        }
        Command::Sweep { common } => {
            let cfg = load(&common.config)?;
            let seed = effective_seed(&cfg, common.seed);
            cmd_sweep(&cfg, seed, &out_dir(&common, "sweep"))
        }
        Command::Verify { common, grid } => {
            let cfg = load(&common.config)?;
            cmd_verify(&cfg, grid, &out_dir(&common, "verify"))
        }
        Command::Track {
            common,
            plan,
            resample,
        } => {
            let cfg = load(&common.config)?;
            cmd_track(&cfg, &plan, resample, &out_dir(&common, "track"))
        }
        Command::Grf { common, wrench } => {
            let cfg = load(&common.config)?;
            cmd_grf(&cfg, wrench, &out_dir(&common, "grf"))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            print_summary(&report);
            if report.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
