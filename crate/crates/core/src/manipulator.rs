//! Two-link planar arm: forward/inverse kinematics, joint servo and
//! end-effector placement in the world frame.
//!
//! Both joints are pitch joints, so the chain lives in the body x–z plane.
//! Positive angles rotate the links downward (towards body −z):
//!
//! ```text
//! p_arm = r_mount + [l1 cos θ1 + l2 cos(θ1+θ2), 0, −(l1 sin θ1 + l2 sin(θ1+θ2))]
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{rotate, Vec3};
use crate::state::{ArmState, FullState, ModelParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IkError {
    #[error("target at planar distance {distance:.4} m outside arm workspace [{min:.4}, {max:.4}] m")]
    Unreachable { distance: f64, min: f64, max: f64 },
    #[error("no joint solution within limits for target")]
    JointLimits,
}

/// Desired joint angles.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmCommand {
    #[serde(rename = "theta1_des_rad")]
    pub theta1_des: f64,
    #[serde(rename = "theta2_des_rad")]
    pub theta2_des: f64,
}

impl ArmCommand {
    pub fn new(theta1_des: f64, theta2_des: f64) -> Self {
        Self { theta1_des, theta2_des }
    }

    pub fn from_arm(arm: &ArmState) -> Self {
        Self::new(arm.theta1, arm.theta2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndEffectorPose {
    pub position: Vec3,
}

/// Solution of [`arm_ik`]. `lateral_residual` is the body-y component the
/// planar arm cannot reach.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub command: ArmCommand,
    pub lateral_residual: f64,
}

/// Planar (forward, down) coordinates of the tip relative to the mount.
fn planar_fk(theta1: f64, theta2: f64, params: &ModelParams) -> (f64, f64) {
    let (s1, c1) = theta1.sin_cos();
    let (s12, c12) = (theta1 + theta2).sin_cos();
    (params.l1 * c1 + params.l2 * c12, params.l1 * s1 + params.l2 * s12)
}

fn planar_to_body(forward: f64, down: f64, params: &ModelParams) -> Vec3 {
    params.r_mount + Vec3::new(forward, 0.0, -down)
}

/// End-effector position in the body frame.
pub fn arm_fk(arm: &ArmState, params: &ModelParams) -> Vec3 {
    let (f, d) = planar_fk(arm.theta1, arm.theta2, params);
    planar_to_body(f, d, params)
}

/// Composite center of mass of the arm in the body frame, with each link's
/// half of `m_arm` lumped at its midpoint.
pub fn arm_com_body(arm: &ArmState, params: &ModelParams) -> Vec3 {
    let (s1, c1) = arm.theta1.sin_cos();
    let (s12, c12) = (arm.theta1 + arm.theta2).sin_cos();
    let mid1 = (0.5 * params.l1 * c1, 0.5 * params.l1 * s1);
    let mid2 = (params.l1 * c1 + 0.5 * params.l2 * c12, params.l1 * s1 + 0.5 * params.l2 * s12);
    planar_to_body(0.5 * (mid1.0 + mid2.0), 0.5 * (mid1.1 + mid2.1), params)
}

/// World-frame end-effector position `p + R·p_arm`.
pub fn end_effector_world(uav: &FullState, params: &ModelParams) -> EndEffectorPose {
    EndEffectorPose {
        position: uav.p + rotate(&uav.rotation, &arm_fk(&uav.arm, params)),
    }
}

/// Workspace radii `[min, max]` of the tip around the mount.
pub fn workspace_radii(params: &ModelParams) -> (f64, f64) {
    ((params.l1 - params.l2).abs(), params.l1 + params.l2)
}

fn solve_branch(forward: f64, down: f64, params: &ModelParams, elbow_down: bool) -> (f64, f64) {
    let (l1, l2) = (params.l1, params.l2);
    let c2 = ((forward * forward + down * down - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let mut theta2 = c2.acos();
    // θ2 ≤ 0 puts the elbow below the shoulder–tip line
    if elbow_down {
        theta2 = -theta2;
    }
    let theta1 = down.atan2(forward) - (l2 * theta2.sin()).atan2(l1 + l2 * theta2.cos());
    (theta1, theta2)
}

/// Closed-form inverse kinematics for a body-frame target.
///
/// The body-y component is projected out and reported as the lateral
/// residual. The elbow-down branch is preferred; the elbow-up branch is
/// used only when elbow-down violates the joint limits.
pub fn arm_ik(target_body: &Vec3, params: &ModelParams) -> Result<IkSolution, IkError> {
    let rel = target_body - params.r_mount;
    let (forward, down) = (rel.x, -rel.z);
    let distance = forward.hypot(down);
    let (min, max) = workspace_radii(params);
    let tol = 1e-12 * max;
    if distance > max + tol || distance < min - tol {
        return Err(IkError::Unreachable { distance, min, max });
    }
    for elbow_down in [true, false] {
        let (t1, t2) = solve_branch(forward, down, params, elbow_down);
        let arm = ArmState::new(t1, t2);
        if arm.within_limits(params) {
            return Ok(IkSolution {
                command: ArmCommand::new(t1, t2),
                lateral_residual: rel.y,
            });
        }
    }
    Err(IkError::JointLimits)
}

/// Rate-limited first-order joint servo. Each joint moves toward its command
/// by at most `rate_limit · dt` and stays within the joint limits.
pub fn servo_step(arm: &ArmState, cmd: &ArmCommand, rate_limit: f64, dt: f64, params: &ModelParams) -> ArmState {
    let max_step = rate_limit * dt;
    let track = |cur: f64, des: f64| {
        let des = params.clamp_joint(des);
        params.clamp_joint(cur + (des - cur).clamp(-max_step, max_step))
    };
    ArmState::new(track(arm.theta1, cmd.theta1_des), track(arm.theta2, cmd.theta2_des))
}
