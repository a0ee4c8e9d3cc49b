//! Mission executive: search → detect → approach → align → done.
//!
//! The transition logic is a pure function of a handful of boolean
//! conditions ([`next_state`]), which keeps the table small enough to check
//! exhaustively. [`mission_step`] evaluates those conditions from a world
//! snapshot and emits the UAV setpoint and arm command for the new state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manipulator::{arm_fk, arm_ik, workspace_radii, ArmCommand, EndEffectorPose, IkError};
use crate::math::{rotate_inverse, Vec3};
use crate::mppi::Setpoint;
use crate::perception::TargetEstimate;
use crate::state::{FullState, ModelParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MissionError {
    #[error("target estimate is stale")]
    StaleTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MissionState {
    Search,
    Detect,
    Approach,
    Align,
    Done,
    Failed,
}

impl MissionState {
    pub const ALL: [MissionState; 6] = [
        MissionState::Search,
        MissionState::Detect,
        MissionState::Approach,
        MissionState::Align,
        MissionState::Done,
        MissionState::Failed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MissionState::Search => "Search",
            MissionState::Detect => "Detect",
            MissionState::Approach => "Approach",
            MissionState::Align => "Align",
            MissionState::Done => "Done",
            MissionState::Failed => "Failed",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, MissionState::Done | MissionState::Failed)
    }
}

impl std::fmt::Display for MissionState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MissionState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MissionState::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mission state {s:?}"))
    }
}

/// Every edge the executive may take. Self-loops are implicit.
pub const TRANSITIONS: &[(MissionState, MissionState)] = &[
    (MissionState::Search, MissionState::Detect),
    (MissionState::Detect, MissionState::Approach),
    (MissionState::Approach, MissionState::Align),
    (MissionState::Align, MissionState::Done),
    (MissionState::Detect, MissionState::Search),
    (MissionState::Approach, MissionState::Search),
    (MissionState::Align, MissionState::Search),
    (MissionState::Search, MissionState::Failed),
    (MissionState::Detect, MissionState::Failed),
    (MissionState::Approach, MissionState::Failed),
    (MissionState::Align, MissionState::Failed),
];

pub fn transition_allowed(from: MissionState, to: MissionState) -> bool {
    from == to || TRANSITIONS.contains(&(from, to))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trigger {
    TargetFresh,
    ObservationsConfirmed,
    StandoffReached,
    DwellComplete,
    TargetLost,
    Timeout,
}

impl Trigger {
    pub fn name(&self) -> &'static str {
        match self {
            Trigger::TargetFresh => "target_fresh",
            Trigger::ObservationsConfirmed => "observations_confirmed",
            Trigger::StandoffReached => "standoff_reached",
            Trigger::DwellComplete => "dwell_complete",
            Trigger::TargetLost => "target_lost",
            Trigger::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub time: f64,
    pub from: MissionState,
    pub to: MissionState,
    pub trigger: Trigger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionConfig {
    /// UAV standoff relative to the target, world frame.
    #[serde(rename = "standoff_offset_m")]
    pub d_offset: Vec3,
    #[serde(rename = "approach_tolerance_m")]
    pub approach_tolerance: f64,
    #[serde(rename = "approach_max_speed_m_s")]
    pub approach_max_speed: f64,
    #[serde(rename = "align_threshold_m")]
    pub align_threshold: f64,
    /// Consecutive aligned control steps before Done.
    pub dwell_steps: u32,
    /// An aligned step only counts once both joints are within this angle
    /// of the previous arm command.
    #[serde(rename = "arm_settle_tolerance_rad")]
    pub arm_settle_tolerance: f64,
    /// Fresh observations needed in Detect before Approach.
    pub detect_observations: u32,
    #[serde(rename = "fresh_window_s")]
    pub fresh_window: f64,
    #[serde(rename = "stale_timeout_s")]
    pub stale_timeout: f64,
    #[serde(rename = "timeout_s")]
    pub timeout: f64,
    #[serde(rename = "waypoint_tolerance_m")]
    pub waypoint_tolerance: f64,
    pub search_waypoints: Vec<Setpoint>,
    /// Arm configuration outside Align.
    pub stow: ArmCommand,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            d_offset: Vec3::new(-0.25, -0.02, 0.0),
            approach_tolerance: 0.10,
            approach_max_speed: 0.2,
            align_threshold: 0.05,
            dwell_steps: 25,
            arm_settle_tolerance: 0.02,
            detect_observations: 5,
            fresh_window: 0.5,
            stale_timeout: 1.0,
            timeout: 60.0,
            waypoint_tolerance: 0.15,
            search_waypoints: Vec::new(),
            stow: ArmCommand::new(std::f64::consts::FRAC_PI_2, 0.0),
        }
    }
}

/// Standoff norm band outside which the configuration is suspicious.
pub const STANDOFF_BAND_M: (f64, f64) = (0.10, 0.30);

impl MissionConfig {
    pub fn validate(&self) -> Result<(), (&'static str, &'static str)> {
        let positive = [
            ("approach_tolerance_m", self.approach_tolerance),
            ("approach_max_speed_m_s", self.approach_max_speed),
            ("align_threshold_m", self.align_threshold),
            ("arm_settle_tolerance_rad", self.arm_settle_tolerance),
            ("fresh_window_s", self.fresh_window),
            ("stale_timeout_s", self.stale_timeout),
            ("timeout_s", self.timeout),
            ("waypoint_tolerance_m", self.waypoint_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err((name, "must be positive and finite"));
            }
        }
        if self.stale_timeout < self.fresh_window {
            return Err(("stale_timeout_s", "must not be shorter than fresh_window_s"));
        }
        if !self.d_offset.iter().all(|c| c.is_finite()) {
            return Err(("standoff_offset_m", "must be finite"));
        }
        Ok(())
    }

    /// Non-fatal configuration warnings.
    pub fn warnings(&self) -> Vec<String> {
        let n = self.d_offset.norm();
        let (lo, hi) = STANDOFF_BAND_M;
        if n < lo || n > hi {
            vec![format!("standoff distance {n:.3} m outside the {lo:.2}-{hi:.2} m band")]
        } else {
            Vec::new()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionStatus {
    pub state: MissionState,
    pub setpoint: Setpoint,
    pub arm_command: ArmCommand,
    pub aligned_streak: u32,
    pub elapsed: f64,
    pub start_time: f64,
    pub waypoint_index: usize,
    /// Target observation count when Detect was entered.
    pub detect_entry_observations: u32,
    /// Last alignment command hit the workspace boundary.
    pub arm_saturated: bool,
    /// Transition taken by the most recent step, if any.
    pub transition: Option<Transition>,
}

impl MissionStatus {
    pub fn start(initial: &FullState, cfg: &MissionConfig, time: f64) -> Self {
        let setpoint = cfg
            .search_waypoints
            .first()
            .copied()
            .unwrap_or_else(|| Setpoint::at(initial.p, initial.rotation.yaw()));
        Self {
            state: MissionState::Search,
            setpoint,
            arm_command: cfg.stow,
            aligned_streak: 0,
            elapsed: 0.0,
            start_time: time,
            waypoint_index: 0,
            detect_entry_observations: 0,
            arm_saturated: false,
            transition: None,
        }
    }
}

/// What the executive can see at a control step.
#[derive(Debug, Clone, Copy)]
pub struct WorldSnapshot<'a> {
    pub uav: &'a FullState,
    pub ee: &'a EndEffectorPose,
    pub target: Option<&'a TargetEstimate>,
    pub time: f64,
}

/// Yaw that points the body x axis from `from` to `to` in the horizontal plane.
pub fn facing_yaw(from: &Vec3, to: &Vec3) -> f64 {
    let d = to - from;
    d.y.atan2(d.x)
}

/// `p_des = p_target + d_offset`, facing the target.
pub fn desired_standoff(target: &TargetEstimate, cfg: &MissionConfig) -> Result<Setpoint, MissionError> {
    if !target.fresh {
        return Err(MissionError::StaleTarget);
    }
    let p_des = target.position_world + cfg.d_offset;
    Ok(Setpoint::at(p_des, facing_yaw(&p_des, &target.position_world)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentCommand {
    pub command: ArmCommand,
    /// The target was outside the reachable workspace; `command` is the
    /// nearest reachable configuration along the bearing.
    pub saturated: bool,
    /// Body-y offset the planar arm cannot correct.
    pub lateral_residual: f64,
}

/// Arm command that places the end effector on the target, projected onto
/// the arm plane.
pub fn arm_alignment_command(target: &TargetEstimate, uav: &FullState, params: &ModelParams) -> AlignmentCommand {
    let body = rotate_inverse(&uav.rotation, &(target.position_world - uav.p));
    match arm_ik(&body, params) {
        Ok(sol) => AlignmentCommand { command: sol.command, saturated: false, lateral_residual: sol.lateral_residual },
        Err(err) => {
            let rel = body - params.r_mount;
            let planar = Vec3::new(rel.x, 0.0, rel.z);
            let (min, max) = workspace_radii(params);
            let d = planar.norm();
            let clamped = if matches!(err, IkError::Unreachable { .. }) && d > 0.0 {
                let r = d.clamp(min + 1e-9 * max, max * (1.0 - 1e-9));
                params.r_mount + planar * (r / d)
            } else {
                params.r_mount + planar
            };
            let command = match arm_ik(&clamped, params) {
                Ok(sol) => sol.command,
                Err(_) => nearest_within_limits(&clamped, params),
            };
            AlignmentCommand { command, saturated: true, lateral_residual: rel.y }
        }
    }
}

/// Best joint-limited configuration for a target the limits exclude:
/// a coarse grid search refined once around the best cell.
fn nearest_within_limits(target_body: &Vec3, params: &ModelParams) -> ArmCommand {
    let (lo, hi) = (params.joint_min, params.joint_max);
    let err = |a: f64, b: f64| (arm_fk(&crate::state::ArmState::new(a, b), params) - target_body).norm_squared();
    let mut best = (0.0, 0.0, f64::INFINITY);
    let n = 60;
    for i in 0..=n {
        for j in 0..=n {
            let a = lo + (hi - lo) * i as f64 / n as f64;
            let b = lo + (hi - lo) * j as f64 / n as f64;
            let e = err(a, b);
            if e < best.2 {
                best = (a, b, e);
            }
        }
    }
    let cell = (hi - lo) / n as f64;
    let (ca, cb, _) = best;
    for i in -20..=20 {
        for j in -20..=20 {
            let a = (ca + cell * i as f64 / 20.0).clamp(lo, hi);
            let b = (cb + cell * j as f64 / 20.0).clamp(lo, hi);
            let e = err(a, b);
            if e < best.2 {
                best = (a, b, e);
            }
        }
    }
    ArmCommand::new(best.0, best.1)
}

/// Inclusive distance check between end effector and target.
pub fn alignment_check(ee: &EndEffectorPose, target: &TargetEstimate, threshold: f64) -> bool {
    (ee.position - target.position_world).norm() <= threshold
}

/// Abstract inputs to the transition function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Conditions {
    pub timed_out: bool,
    /// No estimate, or its age exceeds the stale timeout.
    pub target_lost: bool,
    pub target_fresh: bool,
    pub observations_confirmed: bool,
    pub standoff_reached: bool,
    pub dwell_complete: bool,
}

/// The transition table. Priority: absorbing states, timeout, target loss,
/// then the forward edge of the current state.
pub fn next_state(state: MissionState, c: Conditions) -> (MissionState, Option<Trigger>) {
    use MissionState::*;
    if state.is_terminal() {
        return (state, None);
    }
    if c.timed_out {
        return (Failed, Some(Trigger::Timeout));
    }
    if c.target_lost && state != Search {
        return (Search, Some(Trigger::TargetLost));
    }
    match state {
        Search if c.target_fresh => (Detect, Some(Trigger::TargetFresh)),
        Detect if c.target_fresh && c.observations_confirmed => (Approach, Some(Trigger::ObservationsConfirmed)),
        Approach if c.target_fresh && c.standoff_reached => (Align, Some(Trigger::StandoffReached)),
        Align if c.dwell_complete => (Done, Some(Trigger::DwellComplete)),
        s => (s, None),
    }
}

/// One executive tick at the control rate.
pub fn mission_step(
    status: &MissionStatus,
    world: &WorldSnapshot,
    cfg: &MissionConfig,
    params: &ModelParams,
) -> MissionStatus {
    let mut next = status.clone();
    next.elapsed = world.time - status.start_time;
    next.transition = None;
    if status.state.is_terminal() {
        return next;
    }

    let target = world.target.map(|t| t.refreshed(world.time, cfg.fresh_window));
    let target_fresh = target.is_some_and(|t| t.fresh);
    let target_lost = target.is_none_or(|t| t.age(world.time) > cfg.stale_timeout);
    let standoff = target.as_ref().and_then(|t| desired_standoff(t, cfg).ok());

    // alignment streak is evaluated before the transition so that Align
    // exits on the step the dwell completes
    let mut streak = status.aligned_streak;
    let cmd = &status.arm_command;
    let settled = (world.uav.arm.theta1 - cmd.theta1_des).abs() <= cfg.arm_settle_tolerance
        && (world.uav.arm.theta2 - cmd.theta2_des).abs() <= cfg.arm_settle_tolerance;
    if status.state == MissionState::Align {
        streak = match target.as_ref().filter(|t| t.fresh) {
            Some(t) if settled && alignment_check(world.ee, t, cfg.align_threshold) => streak + 1,
            _ => 0,
        };
    }

    let standoff_reached = standoff.is_some_and(|sp| {
        (world.uav.p - sp.p_des).norm() <= cfg.approach_tolerance && world.uav.v.norm() <= cfg.approach_max_speed
    });
    let confirmed = target
        .is_some_and(|t| t.observations.saturating_sub(status.detect_entry_observations) >= cfg.detect_observations);
    let conditions = Conditions {
        timed_out: next.elapsed > cfg.timeout,
        target_lost,
        target_fresh,
        observations_confirmed: confirmed,
        standoff_reached,
        dwell_complete: streak >= cfg.dwell_steps,
    };
    let (state, trigger) = next_state(status.state, conditions);
    debug_assert!(transition_allowed(status.state, state));
    if let Some(trigger) = trigger {
        next.transition = Some(Transition { time: world.time, from: status.state, to: state, trigger });
    }
    next.state = state;
    next.aligned_streak = if state == MissionState::Align { streak } else { 0 };
    if state == MissionState::Detect && status.state != MissionState::Detect {
        next.detect_entry_observations = target.map_or(0, |t| t.observations);
    }

    match state {
        MissionState::Search => {
            if let Some(wp) = cfg.search_waypoints.get(status.waypoint_index) {
                next.setpoint = *wp;
                if (world.uav.p - wp.p_des).norm() <= cfg.waypoint_tolerance && !cfg.search_waypoints.is_empty() {
                    next.waypoint_index = (status.waypoint_index + 1) % cfg.search_waypoints.len();
                    next.setpoint = cfg.search_waypoints[next.waypoint_index];
                }
            }
        }
        MissionState::Detect => {
            if let Some(t) = target.as_ref() {
                next.setpoint.yaw_des = facing_yaw(&next.setpoint.p_des, &t.position_world);
            }
        }
        MissionState::Approach | MissionState::Align => {
            if let Some(sp) = standoff {
                next.setpoint = sp;
            }
        }
        MissionState::Done | MissionState::Failed => {}
    }

    if state == MissionState::Align {
        if let Some(t) = target.as_ref() {
            let cmd = arm_alignment_command(t, world.uav, params);
            next.arm_command = cmd.command;
            next.arm_saturated = cmd.saturated;
        }
    } else {
        next.arm_command = cfg.stow;
        next.arm_saturated = false;
    }
    next
}
