//! Deterministic simulator and control stack for a quadrotor carrying a
//! two-link arm: rigid-body dynamics with quasi-static arm coupling, planar
//! arm kinematics, synthetic RGB-D target localization, MPPI control, a
//! mission state machine and a batch harness.
//!
//! Conventions: SI units throughout, world frame z-up, body frame with
//! thrust along +z, quaternions stored as `(w, x, y, z)`.

pub mod dynamics;
pub mod harness;
pub mod manipulator;
pub mod math;
pub mod mission;
pub mod mppi;
pub mod perception;
pub mod rng;
pub mod scenario;
pub mod state;

pub use dynamics::{arm_coupling_wrench, hover_thrust, step_rk4, uav_derivatives, DynamicsError, Wrench};
pub use manipulator::{arm_fk, arm_ik, end_effector_world, servo_step, ArmCommand, EndEffectorPose, IkError};
pub use math::{Rotation, Vec3};
pub use mission::{MissionConfig, MissionState, MissionStatus};
pub use mppi::{mppi_step, ControlSequence, MppiConfig, MppiError, Setpoint};
pub use perception::{CameraModel, Detection, NoiseParams, TargetEstimate};
pub use scenario::{load_scenario, Scenario, ScenarioError};
pub use state::{ArmState, ControlInput, FullState, ModelParams};
