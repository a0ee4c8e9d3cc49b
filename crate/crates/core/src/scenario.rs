//! Scenario files: model parameters, initial state, targets and every
//! controller/mission/simulation setting for a trial.
//!
//! Scenarios are JSON. Every physical quantity carries its SI unit as a
//! suffix in the field name (`mass_kg`, `physics_dt_s`, ...). Sections that
//! are omitted take their defaults, so a file only needs to list what it
//! changes. See `docs/scenario.md` for the full schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{Rotation, Vec3};
use crate::mission::MissionConfig;
use crate::mppi::{MppiConfig, Setpoint};
use crate::perception::{CameraModel, NoiseParams};
use crate::state::{ArmState, FullState, ModelParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptionConfig {
    /// EMA gain for target fusion, in (0, 1].
    pub fusion_alpha: f64,
    #[serde(flatten)]
    pub noise: NoiseParams,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self { fusion_alpha: 0.3, noise: NoiseParams::default() }
    }
}

/// Axis-aligned flight volume; `min_m.z` is the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    #[serde(rename = "min_m")]
    pub min: Vec3,
    #[serde(rename = "max_m")]
    pub max: Vec3,
}

impl Default for Arena {
    /// 6 x 6 m floor centered on the origin, 3 m ceiling.
    fn default() -> Self {
        Self { min: Vec3::new(-3.0, -3.0, 0.0), max: Vec3::new(3.0, 3.0, 3.0) }
    }
}

impl Arena {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    #[serde(rename = "physics_dt_s")]
    pub dt_phys: f64,
    #[serde(rename = "camera_rate_hz")]
    pub camera_rate: f64,
    /// Hard cap on simulated time per trial.
    #[serde(rename = "duration_s")]
    pub duration: f64,
    /// Apply the arm's gravity wrench to the vehicle.
    pub coupling_enabled: bool,
    /// Largest distance between the vehicle and the position reference
    /// handed to MPPI; longer moves are fed as a moving carrot. Zero disables.
    #[serde(rename = "reference_lead_m")]
    pub reference_lead: f64,
    /// Time the vehicle keeps holding its setpoint after Done, for
    /// measuring the settled standoff. Zero ends the trial at Done.
    #[serde(rename = "hold_after_done_s")]
    pub hold_after_done: f64,
    /// Leaving this volume ends the trial as Failed.
    pub arena: Arena,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_phys: 0.002,
            camera_rate: 30.0,
            duration: 60.0,
            coupling_enabled: true,
            reference_lead: 0.5,
            hold_after_done: 0.0,
            arena: Arena::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub name: String,
    pub model: ModelParams,
    pub initial_state: FullState,
    #[serde(rename = "targets_m")]
    pub targets: Vec<Vec3>,
    pub camera: CameraModel,
    pub perception: PerceptionConfig,
    pub mppi: MppiConfig,
    pub mission: MissionConfig,
    pub sim: SimConfig,
}

/// Flower on a vertical stand ahead of the start pose.
pub const DEFAULT_TARGET: [f64; 3] = [2.0, 0.3, 1.5];
pub const FLIGHT_ALTITUDE_M: f64 = 1.5;

impl Default for Scenario {
    fn default() -> Self {
        let mut initial = FullState::at_rest(Vec3::new(0.0, 0.0, FLIGHT_ALTITUDE_M));
        let mission = MissionConfig {
            search_waypoints: default_search_pattern(),
            ..MissionConfig::default()
        };
        initial.arm = ArmState::new(mission.stow.theta1_des, mission.stow.theta2_des);
        Self {
            name: "default".into(),
            model: ModelParams::default(),
            initial_state: initial,
            targets: vec![Vec3::from(DEFAULT_TARGET)],
            camera: CameraModel::default(),
            perception: PerceptionConfig::default(),
            mppi: MppiConfig::default(),
            mission,
            sim: SimConfig::default(),
        }
    }
}

/// Yaw sweep on the spot followed by a short lateral leg inside a 6 × 6 m
/// arena.
pub fn default_search_pattern() -> Vec<Setpoint> {
    use std::f64::consts::FRAC_PI_2;
    let h = FLIGHT_ALTITUDE_M;
    vec![
        Setpoint::at(Vec3::new(0.0, 0.0, h), 0.0),
        Setpoint::at(Vec3::new(0.0, 0.0, h), FRAC_PI_2),
        Setpoint::at(Vec3::new(0.0, 1.0, h), FRAC_PI_2),
        Setpoint::at(Vec3::new(0.0, 1.0, h), 0.0),
        Setpoint::at(Vec3::new(0.0, -1.0, h), 0.0),
        Setpoint::at(Vec3::new(0.0, -1.0, h), -FRAC_PI_2),
    ]
}

impl Scenario {
    /// Standoff with a +40 mm world-x component: the vehicle holds beside the
    /// flower, slightly ahead of it along x.
    pub fn standoff_experiment() -> Self {
        let mut s = Self::default();
        s.name = "standoff_experiment".into();
        s.targets = vec![Vec3::new(2.0, 0.0, FLIGHT_ALTITUDE_M)];
        s.mission.d_offset = Vec3::new(0.04, -0.24, 0.0);
        s.initial_state.p = Vec3::new(2.0, -1.2, FLIGHT_ALTITUDE_M);
        s.initial_state.rotation = Rotation::from_yaw(std::f64::consts::FRAC_PI_2);
        s.mission.search_waypoints = vec![Setpoint::at(s.initial_state.p, std::f64::consts::FRAC_PI_2)];
        s.sim.hold_after_done = 4.0;
        s
    }

    /// Noise-free variant of the default scenario.
    pub fn noiseless() -> Self {
        let mut s = Self::default();
        s.name = "noiseless".into();
        s.perception.noise = NoiseParams::noiseless();
        s
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::default()),
            "standoff_experiment" => Some(Self::standoff_experiment()),
            "noiseless" => Some(Self::noiseless()),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 3] = ["default", "standoff_experiment", "noiseless"];

    /// Physics steps per control step.
    pub fn substeps(&self) -> usize {
        (self.mppi.dt_ctrl / self.sim.dt_phys).round() as usize
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json() + "\n")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let m = &self.model;
        let positive = [
            ("model.mass_kg", m.m),
            ("model.gravity_m_s2", m.g_mag),
            ("model.link1_length_m", m.l1),
            ("model.link2_length_m", m.l2),
            ("model.joint_rate_limit_rad_s", m.joint_rate_limit),
            ("model.thrust_max_n", m.thrust_max),
            ("model.torque_max_n_m", m.tau_max),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(field, format!("must be positive and finite, got {v}")));
            }
        }
        if !(m.m_arm >= 0.0 && m.m_arm.is_finite()) {
            return Err(invalid("model.arm_mass_kg", format!("must be non-negative, got {}", m.m_arm)));
        }
        if !m.inertia.iter().all(|j| *j > 0.0 && j.is_finite()) {
            return Err(invalid("model.inertia_diag_kg_m2", "diagonal inertia must be positive definite"));
        }
        if !(m.joint_min < m.joint_max) {
            return Err(invalid("model.joint_min_rad", "must be below joint_max_rad"));
        }
        if !m.r_mount.iter().all(|c| c.is_finite()) {
            return Err(invalid("model.arm_mount_m", "must be finite"));
        }
        if m.thrust_max < m.total_mass() * m.g_mag {
            return Err(invalid("model.thrust_max_n", "cannot lift the vehicle"));
        }

        if !self.initial_state.is_finite() {
            return Err(invalid("initial_state", "must be finite"));
        }
        if !self.initial_state.arm.within_limits(m) {
            return Err(invalid("initial_state.arm", "joint angles outside limits"));
        }
        if self.targets.is_empty() {
            return Err(invalid("targets_m", "at least one target required"));
        }
        if !self.targets.iter().all(|t| t.iter().all(|c| c.is_finite())) {
            return Err(invalid("targets_m", "must be finite"));
        }
        self.camera.validate().map_err(|r| invalid("camera", r))?;

        let p = &self.perception;
        if !(p.fusion_alpha > 0.0 && p.fusion_alpha <= 1.0) {
            return Err(invalid("perception.fusion_alpha", "must be in (0, 1]"));
        }
        if !(p.noise.pixel_std >= 0.0 && p.noise.depth_rel_std >= 0.0) {
            return Err(invalid("perception.pixel_std_px", "noise levels must be non-negative"));
        }
        if !(0.0..=1.0).contains(&p.noise.miss_prob) {
            return Err(invalid("perception.miss_probability", "must be in [0, 1]"));
        }

        self.mppi.validate().map_err(|(f, r)| invalid(format!("mppi.{f}"), r))?;
        self.mission.validate().map_err(|(f, r)| invalid(format!("mission.{f}"), r))?;
        let stow = crate::state::ArmState::new(self.mission.stow.theta1_des, self.mission.stow.theta2_des);
        if !stow.within_limits(m) {
            return Err(invalid("mission.stow", "outside joint limits"));
        }

        let sim = &self.sim;
        if !(sim.dt_phys > 0.0 && sim.dt_phys <= crate::dynamics::MAX_DT) {
            return Err(invalid("sim.physics_dt_s", "must be in (0, 0.05]"));
        }
        let ratio = self.mppi.dt_ctrl / sim.dt_phys;
        if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(invalid(
                "sim.physics_dt_s",
                format!("control_dt_s / physics_dt_s must be a positive integer, got {ratio}"),
            ));
        }
        if !(sim.camera_rate > 0.0 && sim.camera_rate.is_finite()) {
            return Err(invalid("sim.camera_rate_hz", "must be positive"));
        }
        if !(sim.duration > 0.0 && sim.duration.is_finite()) {
            return Err(invalid("sim.duration_s", "must be positive"));
        }
        if !(sim.reference_lead >= 0.0) {
            return Err(invalid("sim.reference_lead_m", "must be non-negative"));
        }
        if !(sim.hold_after_done >= 0.0 && sim.hold_after_done.is_finite()) {
            return Err(invalid("sim.hold_after_done_s", "must be non-negative and finite"));
        }
        let arena = &sim.arena;
        if !(0..3).all(|i| arena.min[i].is_finite() && arena.max[i].is_finite() && arena.min[i] < arena.max[i]) {
            return Err(invalid("sim.arena", "min_m must be below max_m on every axis"));
        }
        if !arena.contains(&self.initial_state.p) {
            return Err(invalid("initial_state.position_m", "outside the arena"));
        }
        if !self.targets.iter().all(|t| arena.contains(t)) {
            return Err(invalid("targets_m", "outside the arena"));
        }
        if !self.mission.search_waypoints.iter().all(|w| arena.contains(&w.p_des)) {
            return Err(invalid("mission.search_waypoints", "outside the arena"));
        }
        for w in self.mission.warnings() {
            log::warn!("scenario {}: {w}", self.name);
        }
        Ok(())
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Read { path: path.to_path_buf(), source })?;
    Scenario::from_json(&text)
}
