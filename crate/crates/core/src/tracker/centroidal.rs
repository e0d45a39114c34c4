use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::BodyModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Foot {
    /// Foot position relative to the center of mass, meters.
    pub position: [f64; 3],
    pub in_contact: bool,
}

impl Foot {
    pub fn new(position: [f64; 3], in_contact: bool) -> Self {
        Self {
            position,
            in_contact,
        }
    }

    #[inline]
    pub fn lever(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stance {
    pub feet: Vec<Foot>,
    pub friction_mu: f64,
}

impl Stance {
    pub fn contact_count(&self) -> usize {
        self.feet.iter().filter(|f| f.in_contact).count()
    }

    /// Four feet at `(±half_length, ±half_width, -height)`, all in contact.
    /// Order: front-left, front-right, rear-left, rear-right.
    pub fn rectangle(half_length: f64, half_width: f64, height: f64, friction_mu: f64) -> Self {
        let feet = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .iter()
            .map(|&(sx, sy)| Foot::new([sx * half_length, sy * half_width, -height], true))
            .collect();
        Self { feet, friction_mu }
    }
}

/// Centroidal momentum rate `[sum f_i + m g ; sum r_i x f_i + tau_i]` over
/// the feet in contact. The lever arm `r_i` is the foot position relative to
/// the center of mass.
///
/// Panics if `forces` or `contact_torques` do not have one entry per foot.
pub fn centroidal_rate(
    stance: &Stance,
    forces: &[Vector3<f64>],
    contact_torques: &[Vector3<f64>],
    model: &BodyModel,
) -> Vector6<f64> {
    assert_eq!(forces.len(), stance.feet.len(), "one force per foot");
    assert_eq!(
        contact_torques.len(),
        stance.feet.len(),
        "one torque per foot"
    );
    let mut linear = Vector3::from(model.gravity) * model.mass;
    let mut angular = Vector3::zeros();
    for ((foot, f), tau) in stance.feet.iter().zip(forces).zip(contact_torques) {
        if !foot.in_contact {
            continue;
        }
        linear += f;
        angular += foot.lever().cross(f) + tau;
    }
    Vector6::new(
        linear.x, linear.y, linear.z, angular.x, angular.y, angular.z,
    )
}
