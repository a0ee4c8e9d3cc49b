//! Vehicle state, control input and physical parameters.

use serde::{Deserialize, Serialize};

use crate::math::{is_finite_vec, Rotation, Vec3};

/// Joint angles of the two-link arm, radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmState {
    #[serde(rename = "theta1_rad")]
    pub theta1: f64,
    #[serde(rename = "theta2_rad")]
    pub theta2: f64,
}

impl ArmState {
    pub fn new(theta1: f64, theta2: f64) -> Self {
        Self { theta1, theta2 }
    }

    pub fn clamped(&self, params: &ModelParams) -> Self {
        Self {
            theta1: params.clamp_joint(self.theta1),
            theta2: params.clamp_joint(self.theta2),
        }
    }

    pub fn within_limits(&self, params: &ModelParams) -> bool {
        [self.theta1, self.theta2]
            .iter()
            .all(|t| *t >= params.joint_min && *t <= params.joint_max)
    }
}

/// Simulated ground truth: UAV pose and twist plus arm configuration.
///
/// Position and velocity are world-frame (z up); `omega` is body-frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FullState {
    #[serde(rename = "position_m")]
    pub p: Vec3,
    #[serde(rename = "velocity_m_s")]
    pub v: Vec3,
    #[serde(rename = "attitude_wxyz")]
    pub rotation: Rotation,
    #[serde(rename = "angular_velocity_rad_s")]
    pub omega: Vec3,
    pub arm: ArmState,
}

impl Default for FullState {
    fn default() -> Self {
        Self::at_rest(Vec3::zeros())
    }
}

impl FullState {
    pub fn at_rest(p: Vec3) -> Self {
        Self {
            p,
            v: Vec3::zeros(),
            rotation: Rotation::identity(),
            omega: Vec3::zeros(),
            arm: ArmState::default(),
        }
    }

    pub fn is_finite(&self) -> bool {
        is_finite_vec(&self.p)
            && is_finite_vec(&self.v)
            && is_finite_vec(&self.omega)
            && self.rotation.wxyz().iter().all(|c| c.is_finite())
            && self.arm.theta1.is_finite()
            && self.arm.theta2.is_finite()
    }
}

/// Collective thrust along body +z plus body torques.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    #[serde(rename = "thrust_n")]
    pub thrust: f64,
    #[serde(rename = "torque_n_m")]
    pub tau: Vec3,
}

impl ControlInput {
    pub fn new(thrust: f64, tau: Vec3) -> Self {
        Self { thrust, tau }
    }

    pub fn clamped(&self, params: &ModelParams) -> Self {
        let t = params.tau_max;
        Self {
            thrust: self.thrust.clamp(0.0, params.thrust_max),
            tau: self.tau.map(|c| c.clamp(-t, t)),
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.thrust, self.tau.x, self.tau.y, self.tau.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            thrust: a[0],
            tau: Vec3::new(a[1], a[2], a[3]),
        }
    }
}

/// Rigid-body and arm parameters. Inertia is diagonal in the body frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    #[serde(rename = "mass_kg")]
    pub m: f64,
    #[serde(rename = "inertia_diag_kg_m2")]
    pub inertia: Vec3,
    #[serde(rename = "gravity_m_s2")]
    pub g_mag: f64,
    #[serde(rename = "arm_mass_kg")]
    pub m_arm: f64,
    #[serde(rename = "link1_length_m")]
    pub l1: f64,
    #[serde(rename = "link2_length_m")]
    pub l2: f64,
    #[serde(rename = "arm_mount_m")]
    pub r_mount: Vec3,
    #[serde(rename = "joint_min_rad")]
    pub joint_min: f64,
    #[serde(rename = "joint_max_rad")]
    pub joint_max: f64,
    #[serde(rename = "joint_rate_limit_rad_s")]
    pub joint_rate_limit: f64,
    #[serde(rename = "thrust_max_n")]
    pub thrust_max: f64,
    #[serde(rename = "torque_max_n_m")]
    pub tau_max: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        let m = 1.5;
        let g = 9.81;
        Self {
            m,
            inertia: Vec3::new(0.02, 0.02, 0.04),
            g_mag: g,
            m_arm: 0.2,
            l1: 0.2,
            l2: 0.2,
            r_mount: Vec3::new(0.1, 0.0, -0.05),
            joint_min: -150f64.to_radians(),
            joint_max: 150f64.to_radians(),
            joint_rate_limit: 1.0,
            thrust_max: 4.0 * m * g,
            tau_max: 1.0,
        }
    }
}

impl ModelParams {
    /// Mass accelerated by thrust: vehicle plus arm.
    pub fn total_mass(&self) -> f64 {
        self.m + self.m_arm
    }

    pub fn clamp_joint(&self, theta: f64) -> f64 {
        theta.clamp(self.joint_min, self.joint_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_match_documented_values() {
        let p = ModelParams::default();
        assert_eq!(p.m, 1.5);
        assert_eq!(p.g_mag, 9.81);
        assert!((p.thrust_max - 58.86).abs() < 1e-12);
        assert!((p.joint_max.to_degrees() - 150.0).abs() < 1e-12);
    }

    #[test]
    fn control_clamp() {
        let p = ModelParams::default();
        let u = ControlInput::new(-3.0, Vec3::new(2.0, -5.0, 0.5)).clamped(&p);
        assert_eq!(u.thrust, 0.0);
        assert_eq!(u.tau, Vec3::new(1.0, -1.0, 0.5));
        let a = u.as_array();
        assert_eq!(ControlInput::from_array(a), u);
    }
}
