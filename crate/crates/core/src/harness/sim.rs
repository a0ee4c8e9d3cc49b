//! Multi-rate closed-loop stepping: MPPI at the control rate, camera at its
//! own rate, servo and rigid-body integration at the physics rate.

use crate::dynamics::{arm_coupling_wrench, step_rk4, DynamicsError, Wrench};
use crate::harness::logs::{detection_row, CsvBuffer, DETECTIONS_HEADER};
use crate::manipulator::{servo_step, ArmCommand};
use crate::math::Vec3;
use crate::mppi::{mppi_step, ControlSequence, Diagnostics, MppiError, RolloutContext, Setpoint};
use crate::perception::{corrupt_detection, fuse_estimate, localize_target, observe_nearest_center, TargetEstimate};
use crate::rng::{stream, Domain};
use crate::scenario::Scenario;
use crate::state::{ControlInput, FullState};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("controller failure: {0}")]
    Controller(#[from] MppiError),
    #[error("dynamics: {0}")]
    Dynamics(#[from] DynamicsError),
}

/// Control applied over one control period.
#[derive(Debug, Clone, Copy)]
pub struct ControlReport {
    pub control: ControlInput,
    pub diagnostics: Diagnostics,
}

/// Moves `sp` toward the vehicle so that it lies at most `lead` away.
/// A non-positive lead leaves the setpoint untouched.
pub fn govern_setpoint(sp: &Setpoint, position: &Vec3, lead: f64) -> Setpoint {
    let delta = sp.p_des - position;
    let dist = delta.norm();
    if lead <= 0.0 || dist <= lead {
        return *sp;
    }
    Setpoint { p_des: position + delta * (lead / dist), ..*sp }
}

/// Closed-loop simulation state for one trial.
pub struct Simulator {
    pub scenario: Scenario,
    pub seed: u64,
    pub uav: FullState,
    pub plan: ControlSequence,
    pub estimate: Option<TargetEstimate>,
    /// Index of the true target behind the latest accepted detection.
    pub tracked: Option<usize>,
    /// Coupling torque the current plan was built around.
    plan_coupling: Vec3,
    step: u64,
    frame: u64,
    substeps: usize,
    detections: Option<CsvBuffer>,
}

impl Simulator {
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        let uav = scenario.initial_state;
        let coupling = coupling_for(&scenario, &uav);
        let plan = ControlSequence::hover(scenario.mppi.horizon, &scenario.model, &coupling);
        let substeps = scenario.substeps();
        Self {
            scenario,
            seed,
            uav,
            plan,
            estimate: None,
            tracked: None,
            plan_coupling: coupling.torque,
            step: 0,
            frame: 0,
            substeps,
            detections: None,
        }
    }

    /// Records every camera frame into an in-memory CSV.
    pub fn with_detection_log(mut self) -> Self {
        self.detections = Some(CsvBuffer::new(DETECTIONS_HEADER));
        self
    }

    pub fn detection_log(&self) -> Option<&CsvBuffer> {
        self.detections.as_ref()
    }

    /// Completed control steps.
    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// Simulated time, an exact multiple of the control period.
    pub fn time(&self) -> f64 {
        self.step as f64 * self.scenario.mppi.dt_ctrl
    }

    /// Runs one MPPI optimization toward `sp`, then integrates the plant
    /// over one control period while the servos track `arm_cmd`.
    pub fn advance(&mut self, sp: &Setpoint, arm_cmd: &ArmCommand) -> Result<ControlReport, SimError> {
        let sc = &self.scenario;
        let governed = govern_setpoint(sp, &self.uav.p, sc.sim.reference_lead);
        let coupling = coupling_for(sc, &self.uav);
        // the arm wrench is modelled, so shift the warm start by its change
        // instead of waiting for the sampler to discover it
        let shift = self.plan_coupling - coupling.torque;
        for u in &mut self.plan.0 {
            u.tau += shift;
        }
        self.plan_coupling = coupling.torque;
        let ctx = RolloutContext { params: &sc.model, coupling: &coupling };
        let out = mppi_step(&self.uav, &governed, &self.plan, &sc.mppi, ctx, self.seed, self.step)?;
        let control = out.control;
        self.plan = out.next_nominal;

        let t0 = self.time();
        let dt = sc.sim.dt_phys;
        for j in 0..self.substeps {
            let t = t0 + j as f64 * dt;
            self.camera_tick(t);
            let sc = &self.scenario;
            let arm = servo_step(&self.uav.arm, arm_cmd, sc.model.joint_rate_limit, dt, &sc.model);
            self.uav.arm = arm;
            let coupling = coupling_for(sc, &self.uav);
            self.uav = step_rk4(&self.uav, &control, &sc.model, &coupling, dt)?;
        }
        self.step += 1;
        Ok(ControlReport { control, diagnostics: out.diagnostics })
    }

    /// Captures every camera frame whose timestamp has been reached.
    fn camera_tick(&mut self, t: f64) {
        let rate = self.scenario.sim.camera_rate;
        while (self.frame as f64) / rate <= t + 1e-9 {
            let frame = self.frame;
            self.frame += 1;
            self.capture(frame, t);
        }
    }

    fn capture(&mut self, frame: u64, time: f64) {
        let sc = &self.scenario;
        let mut rng = stream(self.seed, Domain::Perception, frame, 0);
        let seen = observe_nearest_center(&sc.targets, &self.uav, &sc.camera);
        let mut accepted = None;
        if let Some((idx, ideal)) = seen {
            if let Some(d) = corrupt_detection(&ideal, &sc.perception.noise, &sc.camera, &mut rng) {
                if let Ok(obs) = localize_target(&d, &sc.camera, &self.uav, time) {
                    // a long gap restarts the filter instead of blending in a stale fix
                    let prev = self
                        .estimate
                        .as_ref()
                        .filter(|e| e.age(time) <= sc.mission.stale_timeout);
                    self.estimate = Some(fuse_estimate(prev, &obs, sc.perception.fusion_alpha));
                    self.tracked = Some(idx);
                    accepted = Some(d);
                }
            }
        }
        if let Some(log) = self.detections.as_mut() {
            log.push(&detection_row(time, accepted.as_ref()));
        }
    }
}

fn coupling_for(sc: &Scenario, uav: &FullState) -> Wrench {
    if sc.sim.coupling_enabled {
        arm_coupling_wrench(&uav.arm, &uav.rotation, &sc.model)
    } else {
        Wrench::zero()
    }
}
