use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use density_planner::cli::{cmd_grf, cmd_plan, cmd_sweep, cmd_track, cmd_verify, CliError};
use density_planner::config::{load_config, Config, ConfigError};
use density_planner::env::Point;
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn scene() -> Config {
    load_config(&configs().join("two_obstacles.toml")).unwrap()
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_density-planner"))
        .args(args)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn shipped_scene_values() {
    let cfg = scene();
    let env = &cfg.environment;
    assert_eq!(env.target, [10.0, 0.0]);
    assert_eq!(env.obstacles.len(), 2);
    assert!(env.obstacles.iter().all(|o| o.radius_unsafe == 2.5));
    assert_eq!(env.obstacles[0].radius_sense, 3.0);
    assert_eq!(cfg.density.alpha, 0.2);
    assert_eq!(cfg.planner.dt, 0.01);
}

#[test]
fn shipped_configs_round_trip() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = load_config(&path).unwrap();
        let text = cfg.to_toml_string();
        assert_eq!(
            Config::from_toml_str(&text).unwrap(),
            cfg,
            "{}",
            path.display()
        );
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("two_obstacles.toml")).unwrap();
    let no_target = dir.path().join("no_target.toml");
    fs::write(&no_target, text.replace("target = [10.0, 0.0]\n", "")).unwrap();
    let out = bin(&[
        "plan",
        "--config",
        no_target.to_str().unwrap(),
        "--x0",
        "0,0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("target"));
    assert!(matches!(
        load_config(&no_target),
        Err(ConfigError::Validation(_))
    ));

    let bad_sense = dir.path().join("bad_sense.toml");
    fs::write(
        &bad_sense,
        text.replacen("radius_sense = 3.0", "radius_sense = 2.0", 1),
    )
    .unwrap();
    let out = bin(&[
        "plan",
        "--config",
        bad_sense.to_str().unwrap(),
        "--x0",
        "0,0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("sensing radius must exceed unsafe radius")
    );

    let out = bin(&["plan", "--config", "/nonexistent.toml", "--x0", "0,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plan_from_target_is_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_plan(&scene(), Point::new(10.0, 0.0), dir.path()).unwrap();
    assert!(report.success);
    assert_eq!(report.status, "Converged");
    let csv = fs::read_to_string(dir.path().join("plan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("t,x,y,ux,uy,clearance\n"));
}

#[test]
fn plan_from_inside_obstacle_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = configs().join("two_obstacles.toml");
    let out = bin(&[
        "plan",
        "--config",
        cfg_path.to_str().unwrap(),
        "--x0",
        "1,3.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["status"], "InvalidStart");
    assert_eq!(report["success"], false);
}

#[test]
fn scene_plan_from_origin_is_safe() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = configs().join("two_obstacles.toml");
    let out = bin(&[
        "plan",
        "--config",
        cfg_path.to_str().unwrap(),
        "--x0",
        "0,0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["status"], "Converged");
    assert_eq!(report["unsafe_occupancy"], 0.0);
    for a in report["artifacts"].as_array().unwrap() {
        assert!(Path::new(a.as_str().unwrap()).exists());
    }
    let csv = fs::read_to_string(dir.path().join("plan.csv")).unwrap();
    assert!(csv_column(&csv, "clearance").iter().all(|&c| c > 0.0));
}

#[test]
fn filtered_outputs_are_written() {
    let mut cfg = scene();
    cfg.planner.filter_beta = 0.5;
    cfg.planner.filter_window = 5;
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_plan(&cfg, Point::new(-3.0, 0.0), dir.path()).unwrap();
    assert!(dir.path().join("plan_filtered.csv").exists());
    assert!(dir.path().join("plan_smoothed.csv").exists());
    assert_eq!(report.artifacts.len(), 4);
}

#[test]
fn single_value_sweep_matches_plan() {
    let mut cfg = scene();
    cfg.sweep = vec![density_planner::config::SweepAxis {
        param: "density.alpha".into(),
        values: vec![0.2],
    }];
    cfg.initial = Some(density_planner::config::InitialConditions {
        points: vec![[-3.0, 1.0]],
        ..Default::default()
    });
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_plan(&cfg, Point::new(-3.0, 1.0), a.path()).unwrap();
    let report = cmd_sweep(&cfg, 0, b.path()).unwrap();
    assert_eq!(report.runs.len(), 1);
    assert_eq!(
        fs::read(a.path().join("plan.csv")).unwrap(),
        fs::read(b.path().join("run_c000_x000.csv")).unwrap()
    );
}

#[test]
fn s2_sweep_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(&configs().join("sense_radius_sweep.toml")).unwrap();
    let report = cmd_sweep(&cfg, 0, dir.path()).unwrap();
    assert!(report.success);
    assert_eq!(report.cases.len(), 3);
    assert_eq!(report.deviation.len(), 3);
    for (i, row) in report.deviation.iter().enumerate() {
        assert_eq!(row[i], 0.0);
        for (j, v) in row.iter().enumerate() {
            assert_eq!(*v, report.deviation[j][i]);
        }
    }
    let json = read_json(&dir.path().join("sweep_report.json"));
    assert_eq!(json["runs"].as_array().unwrap().len(), 9);
    for a in &report.artifacts {
        assert!(Path::new(a).exists(), "{a}");
    }
}

#[test]
fn sweep_without_axes_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_sweep(&scene(), 0, dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn sampled_sweep_records_seed() {
    let mut cfg = load_config(&configs().join("alpha_sweep.toml")).unwrap();
    cfg.initial = scene().initial.map(|mut i| {
        i.points.clear();
        i.count = 2;
        i
    });
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_sweep(&cfg, 99, dir.path()).unwrap();
    assert_eq!(report.seed, Some(99));
    assert_eq!(read_json(&dir.path().join("sweep_report.json"))["seed"], 99);
    assert_eq!(report.runs.len(), 4);
}

#[test]
fn verify_reports() {
    let dir = tempfile::tempdir().unwrap();
    let free = load_config(&configs().join("free.toml")).unwrap();
    let r = cmd_verify(&free, 0.1, dir.path()).unwrap();
    assert_eq!(r.divergence.unwrap().positive_fraction(), 1.0);

    let r = cmd_verify(&scene(), 0.05, dir.path()).unwrap();
    let g = r.gradient_check.unwrap();
    assert!(g.samples > 0);
    assert!(g.max_relative_error <= 1e-6, "{}", g.max_relative_error);

    match cmd_verify(&free, 100.0, dir.path()) {
        Err(e @ CliError::NoSamples(_)) => assert!(e.to_string().contains("no samples")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn track_constant_reference() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("still.csv");
    let mut text = String::from("t,x,y,ux,uy,clearance\n");
    for i in 0..30 {
        text.push_str(&format!("{},-3,1,0,0,1\n", i as f64 * 0.1));
    }
    fs::write(&plan, text).unwrap();
    let report = cmd_track(&scene(), &plan, false, dir.path()).unwrap();
    assert!(report.rms_error.unwrap() < 1e-12);
    assert_eq!(report.resampled, Some(false));
}

#[test]
fn track_scene_reference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scene();
    cmd_plan(&cfg, Point::new(-3.0, 2.0), dir.path()).unwrap();
    let plan = dir.path().join("plan.csv");

    let err = cmd_track(&cfg, &plan, false, dir.path()).unwrap_err();
    assert!(matches!(err, CliError::DtMismatch { .. }));
    assert_eq!(err.exit_code(), 1);

    let report = cmd_track(&cfg, &plan, true, dir.path()).unwrap();
    assert_eq!(report.resampled, Some(true));
    assert!(report.rms_error.unwrap() < 0.02 * report.path_length.unwrap());
    let track = fs::read_to_string(dir.path().join("track.csv")).unwrap();
    assert!(track.starts_with("t,px,py,vx,vy,ux,uy,err\n"));
    let uy = csv_column(&track, "uy");
    assert!(uy.iter().any(|&u| u > 0.0) && uy.iter().any(|&u| u < 0.0));
}

#[test]
fn grf_cases() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = scene();
    let r = cmd_grf(&cfg, None, dir.path()).unwrap();
    let grf = r.grf.unwrap();
    let fz = grf.feet[0].force[2];
    for f in &grf.feet {
        assert!((f.force[2] - fz).abs() < 1e-6);
        assert!(f.force[0].abs() < 1e-9 && f.force[1].abs() < 1e-9);
    }

    cfg.grf.as_mut().unwrap().stance.feet[2].in_contact = false;
    let grf = cmd_grf(&cfg, None, dir.path()).unwrap().grf.unwrap();
    assert_eq!(grf.feet[2].force, [0.0; 3]);

    cfg.grf.as_mut().unwrap().stance.friction_mu = 0.05;
    let grf = cmd_grf(&cfg, Some([500.0, 0.0, 100.0, 0.0, 0.0, 0.0]), dir.path())
        .unwrap()
        .grf
        .unwrap();
    assert!(grf.cone_feasible);
    assert!(grf.equilibrium_residual > 0.0);

    cfg.grf
        .as_mut()
        .unwrap()
        .stance
        .feet
        .iter_mut()
        .for_each(|f| f.in_contact = false);
    let err = cmd_grf(&cfg, None, dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn grf_binary_prints_forces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = configs().join("two_obstacles.toml");
    let out = bin(&[
        "grf",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("foot ").count(), 4);
    assert!(stdout.contains("29.43"));
}

#[test]
fn seeded_plan_is_reproducible() {
    let cfg_path = configs().join("two_obstacles.toml");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = bin(&[
            "plan",
            "--config",
            cfg_path.to_str().unwrap(),
            "--seed",
            "5",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(
        fs::read(a.path().join("plan.csv")).unwrap(),
        fs::read(b.path().join("plan.csv")).unwrap()
    );
}
