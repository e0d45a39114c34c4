//! Workspace geometry: target point, circular unsafe sets and their sensing
//! annuli, plus validation and point classification.

use std::fmt;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::density::DensityParams;

pub type Point = Vector2<f64>;

/// Axis-aligned workspace box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workspace {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Workspace {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.x >= self.min[0] && x.x <= self.max[0] && x.y >= self.min[1] && x.y <= self.max[1]
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }
}

/// A circular obstacle: closed unsafe ball of `radius_unsafe` wrapped in a
/// sensing ball of `radius_sense`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius_unsafe: f64,
    pub radius_sense: f64,
}

impl Obstacle {
    pub fn new(center: [f64; 2], radius_unsafe: f64, radius_sense: f64) -> Self {
        Self {
            center,
            radius_unsafe,
            radius_sense,
        }
    }

    #[inline]
    pub fn center(&self) -> Point {
        Point::new(self.center[0], self.center[1])
    }

    #[inline]
    pub fn distance(&self, x: &Point) -> f64 {
        (x - self.center()).norm()
    }

    /// Signed distance to the unsafe boundary (negative inside).
    #[inline]
    pub fn clearance(&self, x: &Point) -> f64 {
        self.distance(x) - self.radius_unsafe
    }

    #[inline]
    pub fn is_unsafe(&self, x: &Point) -> bool {
        self.distance(x) <= self.radius_unsafe
    }

    /// Inside the closed sensing ball (includes the unsafe ball).
    #[inline]
    pub fn senses(&self, x: &Point) -> bool {
        self.distance(x) <= self.radius_sense
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub workspace: Workspace,
    pub target: [f64; 2],
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

impl Environment {
    pub fn new(workspace: Workspace, target: [f64; 2], obstacles: Vec<Obstacle>) -> Self {
        Self {
            workspace,
            target,
            obstacles,
        }
    }

    #[inline]
    pub fn target(&self) -> Point {
        Point::new(self.target[0], self.target[1])
    }

    /// True when `x` lies in the closed union of unsafe balls.
    pub fn in_unsafe(&self, x: &Point) -> bool {
        self.obstacles.iter().any(|ob| ob.is_unsafe(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationFailure {
    EmptyWorkspace,
    NonPositiveUnsafeRadius { obstacle: usize },
    SensingNotLarger { obstacle: usize },
    TargetInsideSensing { obstacle: usize },
    ObstacleOutsideWorkspace { obstacle: usize },
    NonFinite,
}

impl fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyWorkspace => write!(f, "workspace box has non-positive extent"),
            Self::NonPositiveUnsafeRadius { obstacle } => {
                write!(f, "obstacle {obstacle}: unsafe radius must be positive")
            }
            Self::SensingNotLarger { obstacle } => {
                write!(
                    f,
                    "obstacle {obstacle}: sensing radius must exceed unsafe radius"
                )
            }
            Self::TargetInsideSensing { obstacle } => {
                write!(f, "obstacle {obstacle}: target inside sensing ball")
            }
            Self::ObstacleOutsideWorkspace { obstacle } => {
                write!(
                    f,
                    "obstacle {obstacle}: unsafe ball not contained in workspace"
                )
            }
            Self::NonFinite => write!(f, "environment contains non-finite values"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let msgs: Vec<String> = self.failures.iter().map(ToString::to_string).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

pub fn validate_environment(env: &Environment) -> ValidationReport {
    let mut failures = Vec::new();
    let ws = &env.workspace;
    let finite = ws
        .min
        .iter()
        .chain(&ws.max)
        .chain(&env.target)
        .all(|v| v.is_finite())
        && env.obstacles.iter().all(|ob| {
            ob.center.iter().all(|v| v.is_finite())
                && ob.radius_unsafe.is_finite()
                && ob.radius_sense.is_finite()
        });
    if !finite {
        failures.push(ValidationFailure::NonFinite);
        return ValidationReport { failures };
    }
    if ws.width() <= 0.0 || ws.height() <= 0.0 {
        failures.push(ValidationFailure::EmptyWorkspace);
    }
    let target = env.target();
    for (k, ob) in env.obstacles.iter().enumerate() {
        if ob.radius_unsafe <= 0.0 {
            failures.push(ValidationFailure::NonPositiveUnsafeRadius { obstacle: k });
        }
        if ob.radius_sense <= ob.radius_unsafe {
            failures.push(ValidationFailure::SensingNotLarger { obstacle: k });
        }
        if ob.senses(&target) {
            failures.push(ValidationFailure::TargetInsideSensing { obstacle: k });
        }
        let [cx, cy] = ob.center;
        let r = ob.radius_unsafe;
        if cx - r < ws.min[0] || cx + r > ws.max[0] || cy - r < ws.min[1] || cy + r > ws.max[1] {
            failures.push(ValidationFailure::ObstacleOutsideWorkspace { obstacle: k });
        }
    }
    ValidationReport { failures }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Unsafe(usize),
    Sensing(usize),
    Free,
    TargetBlend,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionLabel {
    pub kind: Region,
    pub clearance: f64,
}

/// Minimum signed clearance to any unsafe ball, `+inf` without obstacles.
pub fn min_clearance(env: &Environment, x: &Point) -> f64 {
    env.obstacles
        .iter()
        .map(|ob| ob.clearance(x))
        .fold(f64::INFINITY, f64::min)
}

fn argmin_clearance(env: &Environment, x: &Point) -> Option<(usize, f64)> {
    env.obstacles
        .iter()
        .enumerate()
        .map(|(k, ob)| (k, ob.clearance(x)))
        .fold(None, |best, (k, c)| match best {
            Some((_, bc)) if bc <= c => best,
            _ => Some((k, c)),
        })
}

/// Labels `x` with the innermost region containing it. Boundaries resolve
/// inward: the unsafe ball and sensing ball are both closed.
pub fn classify_point(env: &Environment, params: &DensityParams, x: &Point) -> RegionLabel {
    let nearest = argmin_clearance(env, x);
    let clearance = nearest.map_or(f64::INFINITY, |(_, c)| c);
    let kind = match nearest {
        Some((k, c)) if c <= 0.0 => Region::Unsafe(k),
        _ => {
            let sensing = env
                .obstacles
                .iter()
                .enumerate()
                .filter(|(_, ob)| ob.senses(x))
                .min_by(|(_, a), (_, b)| {
                    let da = a.distance(x) - a.radius_sense;
                    let db = b.distance(x) - b.radius_sense;
                    da.total_cmp(&db)
                })
                .map(|(k, _)| k);
            match sensing {
                Some(k) => Region::Sensing(k),
                None if (x - env.target()).norm() <= params.blend_outer => Region::TargetBlend,
                None => Region::Free,
            }
        }
    };
    RegionLabel { kind, clearance }
}
