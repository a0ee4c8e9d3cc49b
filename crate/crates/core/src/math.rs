//! Vector and rotation algebra shared by every subsystem.
//!
//! Rotations are stored as unit quaternions and renormalized after every
//! update, so the unit-norm invariant holds to machine precision.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// 3-vector in SI units; frame and unit depend on context.
pub type Vec3 = Vector3<f64>;

/// Body-to-world rotation stored as a unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(UnitQuaternion<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self(UnitQuaternion::identity())
    }

    /// Builds a rotation from raw `(w, x, y, z)` components, normalizing them.
    /// Returns `None` for a zero or non-finite quaternion.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Option<Self> {
        let q = Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !n.is_finite() || n < 1e-12 {
            return None;
        }
        // already-unit input is kept bit-exact so serialization round-trips
        let q = if (n - 1.0).abs() <= 1e-12 { q } else { q / n };
        Some(Self(UnitQuaternion::new_unchecked(q)))
    }

    pub fn from_unit_quaternion(q: UnitQuaternion<f64>) -> Self {
        Self(renormalize(q.into_inner()))
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        Self::from_unit_quaternion(UnitQuaternion::from_scaled_axis(axis / n * angle))
    }

    /// Z-Y-X (yaw, pitch, roll) Euler construction.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::from_unit_quaternion(UnitQuaternion::from_euler_angles(roll, pitch, yaw))
    }

    pub fn from_yaw(yaw: f64) -> Self {
        Self::from_axis_angle(Vec3::z(), yaw)
    }

    pub fn quaternion(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.0.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        self.0.to_rotation_matrix().into_inner()
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.inverse())
    }

    /// Composition `self · other` (apply `other` first).
    pub fn compose(&self, other: &Rotation) -> Self {
        Self(renormalize((self.0 * other.0).into_inner()))
    }

    pub fn yaw(&self) -> f64 {
        self.0.euler_angles().2
    }

    /// (roll, pitch, yaw)
    pub fn euler(&self) -> (f64, f64, f64) {
        self.0.euler_angles()
    }

    pub fn angle_to(&self, other: &Rotation) -> f64 {
        self.0.angle_to(&other.0)
    }
}

fn renormalize(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_unchecked(q / q.norm())
}

/// `R · v`.
pub fn rotate(r: &Rotation, v: &Vec3) -> Vec3 {
    r.0.transform_vector(v)
}

/// `Rᵀ · v`.
pub fn rotate_inverse(r: &Rotation, v: &Vec3) -> Vec3 {
    r.0.inverse_transform_vector(v)
}

/// Propagates an attitude by a constant body-frame angular velocity over
/// `dt` using the exact quaternion exponential, then renormalizes.
pub fn integrate_rotation(r: &Rotation, omega: &Vec3, dt: f64) -> Rotation {
    let delta = UnitQuaternion::from_scaled_axis(omega * dt);
    Rotation(renormalize((r.0 * delta).into_inner()))
}

/// Quaternion time derivative `½ q ⊗ [0, ω]` for a body-frame rate.
pub(crate) fn quaternion_rate(q: &Quaternion<f64>, omega: &Vec3) -> Quaternion<f64> {
    q * Quaternion::new(0.0, omega.x, omega.y, omega.z) * 0.5
}

pub(crate) fn rotation_from_raw(q: Quaternion<f64>) -> Option<Rotation> {
    let n = q.norm();
    if !n.is_finite() || n < 1e-12 {
        return None;
    }
    Some(Rotation(UnitQuaternion::new_unchecked(q / n)))
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a % two_pi;
    if w <= -std::f64::consts::PI {
        w += two_pi;
    } else if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

pub fn is_finite_vec(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

impl Serialize for Rotation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.wxyz().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [w, x, y, z] = <[f64; 4]>::deserialize(d)?;
        Rotation::from_wxyz(w, x, y, z)
            .ok_or_else(|| serde::de::Error::custom("attitude quaternion must be finite and non-zero"))
    }
}
