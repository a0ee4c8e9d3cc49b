//! Rigid-body quadrotor dynamics with quasi-static arm coupling.
//!
//! Translational and rotational dynamics:
//!
//! ```text
//! (m + m_arm) p̈ = R [0, 0, thrust]ᵀ + F_c − (m + m_arm) g ẑ
//! J ω̇ = τ + τ_c − ω × (J ω)
//! ```
//!
//! The arm enters only through added mass and the gravity wrench
//! `(F_c, τ_c)` of its current configuration. Joint angles are exogenous
//! here; the manipulator servo moves them between physics steps.

use nalgebra::Quaternion;
use thiserror::Error;

use crate::manipulator::arm_com_body;
use crate::math::{quaternion_rate, rotate_inverse, rotation_from_raw, Rotation, Vec3};
use crate::state::{ArmState, ControlInput, FullState, ModelParams};

/// Upper bound on a single integration step.
pub const MAX_DT: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("simulation diverged: non-finite state")]
    Diverged,
    #[error("time step {0} s outside (0, {MAX_DT}]")]
    InvalidTimeStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dp: Vec3,
    pub dv: Vec3,
    /// Body rate driving attitude propagation.
    pub omega: Vec3,
    pub domega: Vec3,
    pub darm: [f64; 2],
}

/// External wrench acting on the UAV: force in the world frame, torque in
/// the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub fn zero() -> Self {
        Self::default()
    }
}

#[inline]
fn thrust_world(q: &Quaternion<f64>, thrust: f64) -> Vec3 {
    // third column of the rotation matrix of a (possibly unnormalized) q
    let n2 = q.norm_squared();
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    let s = thrust / n2;
    Vec3::new(
        2.0 * (x * z + w * y) * s,
        2.0 * (y * z - w * x) * s,
        (w * w - x * x - y * y + z * z) * s,
    )
}

#[inline]
fn angular_accel(omega: &Vec3, tau: &Vec3, params: &ModelParams, coupling: &Wrench) -> Vec3 {
    let j = &params.inertia;
    let h = j.component_mul(omega);
    (tau + coupling.torque - omega.cross(&h)).component_div(j)
}

#[inline]
fn linear_accel(q: &Quaternion<f64>, u: &ControlInput, params: &ModelParams, coupling: &Wrench) -> Vec3 {
    let mut a = (thrust_world(q, u.thrust) + coupling.force) / params.total_mass();
    a.z -= params.g_mag;
    a
}

/// Continuous-time derivative of the UAV states.
pub fn uav_derivatives(
    state: &FullState,
    u: &ControlInput,
    params: &ModelParams,
    coupling: &Wrench,
) -> StateDerivative {
    let q = state.rotation.quaternion().into_inner();
    StateDerivative {
        dp: state.v,
        dv: linear_accel(&q, u, params, coupling),
        omega: state.omega,
        domega: angular_accel(&state.omega, &u.tau, params, coupling),
        darm: [0.0, 0.0],
    }
}

#[derive(Clone, Copy)]
struct Flat {
    p: Vec3,
    v: Vec3,
    q: Quaternion<f64>,
    w: Vec3,
}

#[derive(Clone, Copy)]
struct FlatRate {
    dp: Vec3,
    dv: Vec3,
    dq: Quaternion<f64>,
    dw: Vec3,
}

impl Flat {
    #[inline]
    fn rate(&self, u: &ControlInput, params: &ModelParams, coupling: &Wrench) -> FlatRate {
        FlatRate {
            dp: self.v,
            dv: linear_accel(&self.q, u, params, coupling),
            dq: quaternion_rate(&self.q, &self.w),
            dw: angular_accel(&self.w, &u.tau, params, coupling),
        }
    }

    #[inline]
    fn advance(&self, k: &FlatRate, h: f64) -> Flat {
        Flat {
            p: self.p + k.dp * h,
            v: self.v + k.dv * h,
            q: self.q + k.dq * h,
            w: self.w + k.dw * h,
        }
    }
}

/// One classical Runge–Kutta step over position, velocity, attitude
/// quaternion and body rate. The quaternion is renormalized and the joint
/// angles clamped afterwards.
pub fn step_rk4(
    state: &FullState,
    u: &ControlInput,
    params: &ModelParams,
    coupling: &Wrench,
    dt: f64,
) -> Result<FullState, DynamicsError> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(DynamicsError::InvalidTimeStep(dt));
    }
    let x = Flat {
        p: state.p,
        v: state.v,
        q: state.rotation.quaternion().into_inner(),
        w: state.omega,
    };
    let k1 = x.rate(u, params, coupling);
    let k2 = x.advance(&k1, 0.5 * dt).rate(u, params, coupling);
    let k3 = x.advance(&k2, 0.5 * dt).rate(u, params, coupling);
    let k4 = x.advance(&k3, dt).rate(u, params, coupling);
    let h6 = dt / 6.0;
    let p = x.p + (k1.dp + (k2.dp + k3.dp) * 2.0 + k4.dp) * h6;
    let v = x.v + (k1.dv + (k2.dv + k3.dv) * 2.0 + k4.dv) * h6;
    let q = x.q + (k1.dq + (k2.dq + k3.dq) * 2.0 + k4.dq) * h6;
    let w = x.w + (k1.dw + (k2.dw + k3.dw) * 2.0 + k4.dw) * h6;

    let rotation = rotation_from_raw(q).ok_or(DynamicsError::Diverged)?;
    let next = FullState {
        p,
        v,
        rotation,
        omega: w,
        arm: state.arm.clamped(params),
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(DynamicsError::Diverged)
    }
}

/// Gravity wrench of a point mass `mass` at body-frame offset `r_com`.
pub fn gravity_wrench(r_com: &Vec3, rotation: &Rotation, mass: f64, g_mag: f64) -> Wrench {
    let force = Vec3::new(0.0, 0.0, -mass * g_mag);
    let torque = r_com.cross(&rotate_inverse(rotation, &force));
    Wrench { force, torque }
}

/// Quasi-static wrench the arm's weight exerts on the UAV in its current
/// configuration.
pub fn arm_coupling_wrench(arm: &ArmState, rotation: &Rotation, params: &ModelParams) -> Wrench {
    if params.m_arm == 0.0 {
        return Wrench::zero();
    }
    gravity_wrench(&arm_com_body(arm, params), rotation, params.m_arm, params.g_mag)
}

/// Thrust that balances gravity plus the vertical coupling force for a
/// level vehicle.
pub fn hover_thrust(params: &ModelParams, coupling: &Wrench) -> f64 {
    params.total_mass() * params.g_mag - coupling.force.z
}
