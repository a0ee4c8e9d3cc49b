//! Model predictive path integral (MPPI) control.
//!
//! [`PathIntegral`] is the model-agnostic sampler: it perturbs a nominal
//! control sequence with Gaussian noise, scores every perturbed sequence
//! with a caller-supplied rollout cost, and blends the perturbations with
//! exponential weights
//!
//! ```text
//! w_k = exp(−(S_k − min_j S_j) / λ) / Σ_j exp(−(S_j − min_j S_j) / λ)
//! u ← clamp(u + Σ_k w_k ε_k)
//! ```
//!
//! The quadrotor controller ([`mppi_step`]) plugs the rigid-body rollout
//! and a quadratic tracking cost into it.
//!
//! Rollout `k` of control step `n` draws its noise from the counter-based
//! stream `(seed, Mppi, n, k)`, and the blend is a serial reduction in
//! rollout order, so results are bit-identical with or without rayon.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{hover_thrust, step_rk4, Wrench};
use crate::math::{wrap_angle, Vec3};
use crate::rng::{stream, Domain};
use crate::state::{ControlInput, FullState, ModelParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MppiError {
    #[error("every rollout diverged or returned infinite cost")]
    AllRolloutsInfinite,
    #[error("nominal sequence has length {got}, expected horizon {expected}")]
    HorizonMismatch { got: usize, expected: usize },
    #[error("invalid MPPI configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Sampling diagnostics for one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub min_cost: f64,
    /// Mean over finite-cost rollouts.
    pub mean_cost: f64,
    /// `1 / Σ w_k²`
    pub effective_sample_size: f64,
}

/// Model-agnostic MPPI sampler over `D`-dimensional controls.
#[derive(Debug, Clone)]
pub struct PathIntegral<const D: usize> {
    pub samples: usize,
    pub lambda: f64,
    pub sigma: [f64; D],
    pub lower: [f64; D],
    pub upper: [f64; D],
    pub parallel: bool,
}

/// Result of one sampler update.
#[derive(Debug, Clone)]
pub struct Update<const D: usize> {
    pub plan: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Normalized exponential weights with min-subtraction. Infinite or NaN
/// costs get zero weight; `None` when no cost is finite.
pub fn exponential_weights(costs: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let min = costs.iter().copied().filter(|c| c.is_finite()).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    let mut w: Vec<f64> = costs
        .iter()
        .map(|&c| if c.is_finite() { (-(c - min) / lambda).exp() } else { 0.0 })
        .collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    Some(w)
}

impl<const D: usize> PathIntegral<D> {
    fn clamp(&self, mut u: [f64; D]) -> [f64; D] {
        for c in 0..D {
            u[c] = u[c].clamp(self.lower[c], self.upper[c]);
        }
        u
    }

    fn perturb(&self, nominal: &[[f64; D]], seed: u64, step: u64, k: usize) -> Vec<[f64; D]> {
        let mut rng = stream(seed, Domain::Mppi, step, k as u64);
        nominal
            .iter()
            .map(|u| {
                let mut out = *u;
                for c in 0..D {
                    let n: f64 = rng.sample(StandardNormal);
                    out[c] += self.sigma[c] * n;
                }
                self.clamp(out)
            })
            .collect()
    }

    /// One sampling/weighting pass. `cost` must be a pure function of the
    /// control sequence.
    pub fn update<F>(&self, nominal: &[[f64; D]], seed: u64, step: u64, cost: F) -> Result<Update<D>, MppiError>
    where
        F: Fn(&[[f64; D]]) -> f64 + Sync,
    {
        if self.samples == 0 {
            return Err(MppiError::InvalidConfig("sample count must be at least 1"));
        }
        let evaluate = |k: usize| {
            let seq = self.perturb(nominal, seed, step, k);
            let s = cost(&seq);
            (seq, if s.is_nan() { f64::INFINITY } else { s })
        };
        let rollouts: Vec<(Vec<[f64; D]>, f64)> = if self.parallel {
            (0..self.samples).into_par_iter().map(evaluate).collect()
        } else {
            (0..self.samples).map(evaluate).collect()
        };
        let costs: Vec<f64> = rollouts.iter().map(|(_, s)| *s).collect();
        let weights = exponential_weights(&costs, self.lambda).ok_or(MppiError::AllRolloutsInfinite)?;

        let mut delta = vec![[0.0; D]; nominal.len()];
        for ((seq, _), w) in rollouts.iter().zip(&weights) {
            if *w == 0.0 {
                continue;
            }
            for (acc, (s, u)) in delta.iter_mut().zip(seq.iter().zip(nominal)) {
                for c in 0..D {
                    acc[c] += w * (s[c] - u[c]);
                }
            }
        }
        let plan = nominal
            .iter()
            .zip(&delta)
            .map(|(u, d)| {
                let mut out = *u;
                for c in 0..D {
                    out[c] += d[c];
                }
                self.clamp(out)
            })
            .collect();

        let finite: Vec<f64> = costs.iter().copied().filter(|c| c.is_finite()).collect();
        let diagnostics = Diagnostics {
            min_cost: finite.iter().copied().fold(f64::INFINITY, f64::min),
            mean_cost: finite.iter().sum::<f64>() / finite.len() as f64,
            effective_sample_size: 1.0 / weights.iter().map(|w| w * w).sum::<f64>(),
        };
        Ok(Update { plan, weights, diagnostics })
    }
}

/// Receding-horizon shift: drop the first element and repeat the last.
pub fn shift_plan<T: Copy>(plan: &[T]) -> Vec<T> {
    match plan.split_first() {
        None => Vec::new(),
        Some((_, rest)) if rest.is_empty() => plan.to_vec(),
        Some((_, rest)) => {
            let mut out = rest.to_vec();
            out.push(*plan.last().unwrap());
            out
        }
    }
}

/// Receding-horizon shift that appends `fill` instead of repeating the last
/// element.
pub fn shift_plan_with<T: Copy>(plan: &[T], fill: T) -> Vec<T> {
    let mut out: Vec<T> = plan.iter().skip(1).copied().collect();
    if !plan.is_empty() {
        out.push(fill);
    }
    out
}

/// Quadrotor MPPI configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MppiConfig {
    /// Rollout count K.
    pub samples: usize,
    /// Horizon T in control steps.
    pub horizon: usize,
    #[serde(rename = "control_dt_s")]
    pub dt_ctrl: f64,
    pub lambda: f64,
    #[serde(rename = "sigma_thrust_n")]
    pub sigma_thrust: f64,
    #[serde(rename = "sigma_torque_n_m")]
    pub sigma_torque: f64,
    #[serde(rename = "w_position")]
    pub w_p: f64,
    #[serde(rename = "w_velocity")]
    pub w_v: f64,
    #[serde(rename = "w_effort")]
    pub w_u: f64,
    #[serde(rename = "w_terminal")]
    pub w_terminal: f64,
    /// Weight on squared yaw error (rad²).
    #[serde(rename = "w_yaw")]
    pub w_yaw: f64,
    /// Weight on squared body rate ((rad/s)²), part of the effort term.
    #[serde(rename = "w_body_rate")]
    pub w_omega: f64,
    /// Evaluate rollouts on the rayon pool. Does not change results.
    pub parallel: bool,
}

impl Default for MppiConfig {
    fn default() -> Self {
        Self {
            samples: 512,
            horizon: 30,
            dt_ctrl: 0.02,
            lambda: 1.0,
            sigma_thrust: 2.0,
            sigma_torque: 0.05,
            w_p: 10.0,
            w_v: 1.0,
            w_u: 0.01,
            w_terminal: 50.0,
            w_yaw: 20.0,
            w_omega: 3.0,
            parallel: true,
        }
    }
}

impl MppiConfig {
    pub fn validate(&self) -> Result<(), (&'static str, &'static str)> {
        if self.samples < 1 {
            return Err(("samples", "must be at least 1"));
        }
        if self.horizon < 1 {
            return Err(("horizon", "must be at least 1"));
        }
        if !(self.dt_ctrl > 0.0 && self.dt_ctrl <= crate::dynamics::MAX_DT) {
            return Err(("control_dt_s", "must be in (0, 0.05]"));
        }
        if !(self.lambda > 0.0) {
            return Err(("lambda", "must be positive"));
        }
        if !(self.sigma_thrust > 0.0) {
            return Err(("sigma_thrust_n", "must be positive"));
        }
        if !(self.sigma_torque > 0.0) {
            return Err(("sigma_torque_n_m", "must be positive"));
        }
        let weights = [
            ("w_position", self.w_p),
            ("w_velocity", self.w_v),
            ("w_effort", self.w_u),
            ("w_terminal", self.w_terminal),
            ("w_yaw", self.w_yaw),
            ("w_body_rate", self.w_omega),
        ];
        for (name, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err((name, "must be finite and non-negative"));
            }
        }
        Ok(())
    }

    fn sampler(&self, params: &ModelParams) -> PathIntegral<4> {
        let t = params.tau_max;
        PathIntegral {
            samples: self.samples,
            lambda: self.lambda,
            sigma: [self.sigma_thrust, self.sigma_torque, self.sigma_torque, self.sigma_torque],
            lower: [0.0, -t, -t, -t],
            upper: [params.thrust_max, t, t, t],
            parallel: self.parallel,
        }
    }
}

/// Tracking reference for the controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setpoint {
    #[serde(rename = "position_m")]
    pub p_des: Vec3,
    #[serde(rename = "velocity_m_s", default = "Vec3::zeros")]
    pub v_des: Vec3,
    #[serde(rename = "yaw_rad", default)]
    pub yaw_des: f64,
}

impl Setpoint {
    pub fn at(p_des: Vec3, yaw_des: f64) -> Self {
        Self { p_des, v_des: Vec3::zeros(), yaw_des }
    }
}

/// Nominal control plan over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence(pub Vec<ControlInput>);

impl ControlSequence {
    /// Constant plan holding the equilibrium input for the given coupling.
    pub fn hover(horizon: usize, params: &ModelParams, coupling: &Wrench) -> Self {
        Self(vec![equilibrium_input(params, coupling); horizon])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn to_arrays(&self) -> Vec<[f64; 4]> {
        self.0.iter().map(ControlInput::as_array).collect()
    }

    fn from_arrays(a: &[[f64; 4]]) -> Self {
        Self(a.iter().copied().map(ControlInput::from_array).collect())
    }
}

/// Context held fixed across a rollout.
#[derive(Debug, Clone, Copy)]
pub struct RolloutContext<'a> {
    pub params: &'a ModelParams,
    pub coupling: &'a Wrench,
}

/// Input that holds the vehicle still under the given coupling wrench.
pub fn equilibrium_input(params: &ModelParams, coupling: &Wrench) -> ControlInput {
    ControlInput::new(hover_thrust(params, coupling), -coupling.torque).clamped(params)
}

/// Running cost ℓ(x, u). Effort is measured from the equilibrium input `eq`.
pub fn stage_cost(state: &FullState, u: &ControlInput, sp: &Setpoint, cfg: &MppiConfig, eq: &ControlInput) -> f64 {
    let yaw_err = wrap_angle(state.rotation.yaw() - sp.yaw_des);
    cfg.w_p * (state.p - sp.p_des).norm_squared()
        + cfg.w_yaw * yaw_err * yaw_err
        + cfg.w_v * (state.v - sp.v_des).norm_squared()
        + cfg.w_u * ((u.thrust - eq.thrust).powi(2) + (u.tau - eq.tau).norm_squared())
        + cfg.w_omega * state.omega.norm_squared()
}

pub fn terminal_cost(state: &FullState, sp: &Setpoint, cfg: &MppiConfig) -> f64 {
    cfg.w_terminal * (state.p - sp.p_des).norm_squared()
}

fn rollout_cost_arrays(x0: &FullState, seq: &[[f64; 4]], sp: &Setpoint, cfg: &MppiConfig, ctx: RolloutContext) -> f64 {
    let eq = equilibrium_input(ctx.params, ctx.coupling);
    let mut x = *x0;
    let mut cost = 0.0;
    for a in seq {
        let u = ControlInput::from_array(*a);
        cost += stage_cost(&x, &u, sp, cfg, &eq);
        x = match step_rk4(&x, &u, ctx.params, ctx.coupling, cfg.dt_ctrl) {
            Ok(next) => next,
            Err(_) => return f64::INFINITY,
        };
    }
    cost + terminal_cost(&x, sp, cfg)
}

/// Simulates `seq` from `x0` at the control rate with the arm frozen and the
/// coupling wrench held, summing stage costs plus the terminal cost.
/// Diverged rollouts cost `+∞`.
pub fn rollout_cost(x0: &FullState, seq: &ControlSequence, sp: &Setpoint, cfg: &MppiConfig, ctx: RolloutContext) -> f64 {
    rollout_cost_arrays(x0, &seq.to_arrays(), sp, cfg, ctx)
}

/// Output of [`mppi_update`].
#[derive(Debug, Clone)]
pub struct MppiOutput {
    /// Updated plan, not yet shifted.
    pub plan: ControlSequence,
    pub diagnostics: Diagnostics,
}

/// One MPPI optimization pass returning the updated (unshifted) plan.
/// `step` indexes the RNG stream and should be the control step counter.
#[allow(clippy::too_many_arguments)]
pub fn mppi_update(
    x0: &FullState,
    sp: &Setpoint,
    nominal: &ControlSequence,
    cfg: &MppiConfig,
    ctx: RolloutContext,
    seed: u64,
    step: u64,
) -> Result<MppiOutput, MppiError> {
    if nominal.len() != cfg.horizon {
        return Err(MppiError::HorizonMismatch { got: nominal.len(), expected: cfg.horizon });
    }
    let sampler = cfg.sampler(ctx.params);
    let nominal = ControlSequence(nominal.0.iter().map(|u| u.clamped(ctx.params)).collect());
    let update = sampler.update(&nominal.to_arrays(), seed, step, |seq| {
        rollout_cost_arrays(x0, seq, sp, cfg, ctx)
    })?;
    Ok(MppiOutput {
        plan: ControlSequence::from_arrays(&update.plan),
        diagnostics: update.diagnostics,
    })
}

/// Result of [`mppi_step`]: the control to apply now and the warm start for
/// the next step.
#[derive(Debug, Clone)]
pub struct MppiStep {
    pub control: ControlInput,
    pub next_nominal: ControlSequence,
    pub diagnostics: Diagnostics,
}

/// Receding-horizon MPPI step.
#[allow(clippy::too_many_arguments)]
pub fn mppi_step(
    x0: &FullState,
    sp: &Setpoint,
    nominal: &ControlSequence,
    cfg: &MppiConfig,
    ctx: RolloutContext,
    seed: u64,
    step: u64,
) -> Result<MppiStep, MppiError> {
    let out = mppi_update(x0, sp, nominal, cfg, ctx, seed, step)?;
    Ok(MppiStep {
        control: out.plan.0[0],
        next_nominal: ControlSequence(shift_plan_with(&out.plan.0, equilibrium_input(ctx.params, ctx.coupling))),
        diagnostics: out.diagnostics,
    })
}
