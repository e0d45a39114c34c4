//! TOML configuration: one document drives every subcommand.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::DensityParams;
use crate::env::{validate_environment, Environment, Point, Workspace};
use crate::planner::{PlannerConfig, SweepCase};
use crate::tracker::{BodyModel, GrfSettings, Stance, TrackerConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation failed:\n{}", .0.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub environment: Environment,
    #[serde(default)]
    pub density: DensityParams,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub tracker: TrackerSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConditions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grf: Option<GrfSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerSection {
    #[serde(default)]
    pub body: BodyModel,
    #[serde(default)]
    pub mpc: TrackerConfig,
}

/// One named parameter and the values it takes. Names:
/// `density.alpha`, `density.blend_inner`, `density.blend_outer`,
/// `planner.dt`, `planner.convergence_eps`,
/// `obstacle.<k>.radius_unsafe`, `obstacle.<k>.radius_sense` (`k` from 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: String,
    pub values: Vec<f64>,
}

/// Explicit points, followed by `count` uniform samples from `region`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConditions {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Workspace>,
    #[serde(default)]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

impl InitialConditions {
    pub fn sample(&self, seed: u64) -> Vec<Point> {
        let mut out: Vec<Point> = self.points.iter().map(|p| Point::new(p[0], p[1])).collect();
        if let Some(region) = &self.region {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..self.count {
                let x = rng.gen_range(region.min[0]..=region.max[0]);
                let y = rng.gen_range(region.min[1]..=region.max[1]);
                out.push(Point::new(x, y));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrfSection {
    pub stance: Stance,
    /// `[fx, fy, fz, mx, my, mz]`
    pub wrench: [f64; 6],
    #[serde(default)]
    pub settings: GrfSettings,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Param {
    Alpha,
    BlendInner,
    BlendOuter,
    Dt,
    ConvergenceEps,
    RadiusUnsafe(usize),
    RadiusSense(usize),
}

impl Param {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "density.alpha" => Self::Alpha,
            "density.blend_inner" => Self::BlendInner,
            "density.blend_outer" => Self::BlendOuter,
            "planner.dt" => Self::Dt,
            "planner.convergence_eps" => Self::ConvergenceEps,
            _ => {
                let rest = name.strip_prefix("obstacle.")?;
                let (k, field) = rest.split_once('.')?;
                let k = k.parse().ok()?;
                match field {
                    "radius_unsafe" => Self::RadiusUnsafe(k),
                    "radius_sense" => Self::RadiusSense(k),
                    _ => return None,
                }
            }
        })
    }

    fn apply(self, case: &mut SweepCase, v: f64) {
        match self {
            Self::Alpha => case.params.alpha = v,
            Self::BlendInner => case.params.blend_inner = v,
            Self::BlendOuter => case.params.blend_outer = v,
            Self::Dt => case.cfg.dt = v,
            Self::ConvergenceEps => case.cfg.convergence_eps = v,
            Self::RadiusUnsafe(k) => case.env.obstacles[k].radius_unsafe = v,
            Self::RadiusSense(k) => case.env.obstacles[k].radius_sense = v,
        }
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match toml::to_string(self) {
            Ok(s) => f.write_str(&s),
            Err(_) => Err(fmt::Error),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| {
            let msg = e.to_string();
            if e.message().starts_with("missing field") {
                ConfigError::Validation(vec![msg.trim_end().to_string()])
            } else {
                ConfigError::Parse(msg.trim_end().to_string())
            }
        })?;
        let errors = cfg.validate();
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Validation(errors))
        }
    }

    pub fn to_toml_string(&self) -> String {
        self.to_string()
    }

    /// Every problem found, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        errors.extend(
            validate_environment(&self.environment)
                .failures
                .iter()
                .map(|f| format!("environment: {f}")),
        );
        if let Err(e) = self.density.validate() {
            errors.push(format!("density: {e}"));
        }
        if let Err(e) = self.planner.validate() {
            errors.push(format!("planner: {e}"));
        }
        if let Err(e) = self.tracker.body.validate() {
            errors.push(format!("tracker.body: {e}"));
        }
        if let Err(e) = self.tracker.mpc.validate() {
            errors.push(format!("tracker.mpc: {e}"));
        }
        let target = self.environment.target();
        for (k, ob) in self.environment.obstacles.iter().enumerate() {
            if ob.distance(&target) <= ob.radius_sense + self.density.blend_outer {
                errors.push(format!(
                    "environment: obstacle {k}: sensing ball overlaps the target blend ball"
                ));
            }
        }
        for (i, axis) in self.sweep.iter().enumerate() {
            match Param::parse(&axis.param) {
                None => errors.push(format!("sweep[{i}]: unknown parameter `{}`", axis.param)),
                Some(Param::RadiusUnsafe(k) | Param::RadiusSense(k))
                    if k >= self.environment.obstacles.len() =>
                {
                    errors.push(format!("sweep[{i}]: no obstacle with index {k}"))
                }
                Some(_) => {}
            }
            if axis.values.is_empty() {
                errors.push(format!("sweep[{i}]: `values` is empty"));
            }
        }
        if errors.is_empty() && !self.sweep.is_empty() {
            for case in self.sweep_cases() {
                let sub = Config {
                    environment: case.env,
                    density: case.params,
                    planner: case.cfg,
                    sweep: Vec::new(),
                    ..self.clone()
                };
                errors.extend(
                    sub.validate()
                        .into_iter()
                        .map(|e| format!("sweep case {}: {e}", case.label)),
                );
            }
        }
        if let Some(init) = &self.initial {
            if init.count > 0 && init.region.is_none() {
                errors.push("initial: `count` > 0 requires `region`".into());
            }
            if let Some(r) = &init.region {
                if !(r.min[0] <= r.max[0] && r.min[1] <= r.max[1]) {
                    errors.push("initial: region min exceeds max".into());
                }
            }
        }
        if let Some(grf) = &self.grf {
            if !(grf.stance.friction_mu >= 0.0) {
                errors.push("grf: friction_mu must be non-negative".into());
            }
            if !(grf.settings.regularization > 0.0) {
                errors.push("grf: regularization must be positive".into());
            }
        }
        errors
    }

    /// Cross product of the sweep axes, first axis outermost. With no axes
    /// this is the single base case.
    pub fn sweep_cases(&self) -> Vec<SweepCase> {
        let base = SweepCase {
            label: "base".into(),
            env: self.environment.clone(),
            params: self.density,
            cfg: self.planner,
        };
        let mut cases = vec![(base, Vec::<String>::new())];
        for axis in &self.sweep {
            let Some(param) = Param::parse(&axis.param) else {
                continue;
            };
            let mut next = Vec::with_capacity(cases.len() * axis.values.len());
            for (case, tags) in &cases {
                for &v in &axis.values {
                    let mut c = case.clone();
                    param.apply(&mut c, v);
                    let mut t = tags.clone();
                    t.push(format!("{}={v}", axis.param));
                    next.push((c, t));
                }
            }
            cases = next;
        }
        cases
            .into_iter()
            .map(|(mut c, tags)| {
                if !tags.is_empty() {
                    c.label = tags.join(",");
                }
                c
            })
            .collect()
    }
}

pub fn load_config(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Config::from_toml_str(&text)
}
