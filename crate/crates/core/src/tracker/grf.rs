use nalgebra::{DMatrix, DVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::power::lipschitz_bound;
use super::{Stance, TrackerError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrfSettings {
    /// Tikhonov weight on `sum |f_i|^2`.
    pub regularization: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for GrfSettings {
    fn default() -> Self {
        Self {
            regularization: 1e-9,
            tol: 1e-10,
            max_iters: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrfSolution {
    /// One force per foot (swing feet exactly zero).
    pub forces: Vec<Vector3<f64>>,
    /// `|[sum f - f_des ; sum r x f - m_des]|`
    pub equilibrium_residual: f64,
    pub cone_feasible: bool,
    pub iterations: usize,
    pub objective: f64,
}

/// Stacked contact wrench map: columns `3i..3i+3` hold `[I ; [r_i]x]`.
fn wrench_map(stance: &Stance, contacts: &[usize]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(6, 3 * contacts.len());
    for (j, &i) in contacts.iter().enumerate() {
        let r = stance.feet[i].lever();
        let c = 3 * j;
        for k in 0..3 {
            a[(k, c + k)] = 1.0;
        }
        let skew = r.cross_matrix();
        a.view_mut((3, c), (3, 3)).copy_from(&skew);
    }
    a
}

/// Clamp onto the four-sided friction pyramid: normal force first, then the
/// tangential components against `mu * F_z`.
#[inline]
fn clamp_to_pyramid(f: &mut [f64], mu: f64) {
    f[2] = f[2].max(0.0);
    let bound = mu * f[2];
    f[0] = f[0].clamp(-bound, bound);
    f[1] = f[1].clamp(-bound, bound);
}

/// Euclidean projection onto the pyramid `|F_x| <= mu F_z, |F_y| <= mu F_z`.
///
/// Works in the octant `F_x, F_y >= 0` and picks the nearest feasible point
/// among the projections onto each face, the edge ray and the apex. A final
/// clamp absorbs rounding so the result is exactly feasible.
fn project_to_pyramid(f: &mut [f64], mu: f64) {
    let (sx, sy) = (f[0].signum(), f[1].signum());
    let p = Vector3::new(f[0].abs(), f[1].abs(), f[2]);
    let feasible = |v: &Vector3<f64>| {
        v.z >= -1e-12 && v.x.abs() <= mu * v.z + 1e-12 && v.y.abs() <= mu * v.z + 1e-12
    };
    let best = if feasible(&p) {
        p
    } else {
        let mut cands = vec![Vector3::zeros()];
        let edge = Vector3::new(mu, mu, 1.0).normalize();
        cands.push(edge * p.dot(&edge).max(0.0));
        for n in [Vector3::new(1.0, 0.0, -mu), Vector3::new(0.0, 1.0, -mu)] {
            let n = n.normalize();
            cands.push(p - n * p.dot(&n));
        }
        cands
            .into_iter()
            .filter(|c| feasible(c))
            .min_by(|a, b| (a - p).norm_squared().total_cmp(&(b - p).norm_squared()))
            .unwrap_or_else(Vector3::zeros)
    };
    f[0] = sx * best.x;
    f[1] = sy * best.y;
    f[2] = best.z;
    clamp_to_pyramid(f, mu);
}

pub fn pyramid_feasible(f: &Vector3<f64>, mu: f64) -> bool {
    f.z >= 0.0 && f.x.abs() <= mu * f.z && f.y.abs() <= mu * f.z
}

pub fn wrench_residual(stance: &Stance, forces: &[Vector3<f64>], wrench_des: &Vector6<f64>) -> f64 {
    let mut lin = Vector3::zeros();
    let mut ang = Vector3::zeros();
    for (foot, f) in stance.feet.iter().zip(forces) {
        if foot.in_contact {
            lin += f;
            ang += foot.lever().cross(f);
        }
    }
    let r = Vector6::new(lin.x, lin.y, lin.z, ang.x, ang.y, ang.z) - wrench_des;
    r.norm()
}

/// Distributes a desired contact wrench over the feet in contact.
///
/// Minimizes `|A f - w|^2 + eps |f|^2` by projected gradient descent with
/// step `1/L`, projecting every iterate onto the friction pyramid. Swing feet
/// carry no decision variables and their forces are exactly zero.
pub fn distribute_grf(
    stance: &Stance,
    wrench_des: &Vector6<f64>,
    settings: &GrfSettings,
) -> Result<GrfSolution, TrackerError> {
    let contacts: Vec<usize> = (0..stance.feet.len())
        .filter(|&i| stance.feet[i].in_contact)
        .collect();
    if contacts.is_empty() {
        return Err(TrackerError::NoContacts);
    }
    if !(settings.regularization > 0.0) || !(stance.friction_mu >= 0.0) {
        return Err(TrackerError::InvalidConfig(
            "regularization must be positive and friction_mu non-negative".into(),
        ));
    }
    let eps = settings.regularization;
    let mu = stance.friction_mu;
    let a = wrench_map(stance, &contacts);
    let n = a.ncols();
    let w = DVector::from_column_slice(wrench_des.as_slice());
    let hessian = (a.transpose() * &a + DMatrix::identity(n, n) * eps) * 2.0;
    let lin = a.transpose() * &w * -2.0;
    let step = 1.0 / lipschitz_bound(&hessian);

    let mut f = DVector::zeros(n);
    let mut iterations = 0;
    while iterations < settings.max_iters {
        let grad = &hessian * &f + &lin;
        let mut next = &f - grad * step;
        for c in 0..contacts.len() {
            project_to_pyramid(&mut next.as_mut_slice()[3 * c..3 * c + 3], mu);
        }
        let moved = (&next - &f).norm() / step;
        f = next;
        iterations += 1;
        if moved <= settings.tol {
            break;
        }
    }

    let mut forces = vec![Vector3::zeros(); stance.feet.len()];
    for (c, &i) in contacts.iter().enumerate() {
        forces[i] = Vector3::new(f[3 * c], f[3 * c + 1], f[3 * c + 2]);
    }
    let resid = &a * &f - &w;
    Ok(GrfSolution {
        equilibrium_residual: resid.norm(),
        cone_feasible: contacts.iter().all(|&i| pyramid_feasible(&forces[i], mu)),
        objective: resid.norm_squared() + eps * f.norm_squared(),
        forces,
        iterations,
    })
}
