//! One closed-loop mission trial with metrics and CSV logs.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::harness::logs::{
    mppi_row, transition_row, CsvBuffer, TrajectoryRow, MPPI_HEADER, TRAJECTORY_HEADER, TRANSITIONS_HEADER,
};
use crate::harness::sim::Simulator;
use crate::harness::HarnessError;
use crate::manipulator::end_effector_world;
use crate::math::Vec3;
use crate::mission::{mission_step, MissionState, MissionStatus, WorldSnapshot};
use crate::scenario::Scenario;
use crate::state::ControlInput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Done,
    Failed,
    Diverged,
}

/// Metrics of one trial. End-effector errors are measured against the true
/// position of the target being tracked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub outcome: Outcome,
    #[serde(rename = "time_to_done_s")]
    pub time_to_done: Option<f64>,
    /// Error at the last logged control step (the completion instant for Done).
    #[serde(rename = "final_ee_error_m")]
    pub final_ee_error: Option<f64>,
    #[serde(rename = "min_ee_error_m")]
    pub min_ee_error: Option<f64>,
    /// RMS of ‖p − p_des‖ over Align steps.
    #[serde(rename = "align_position_rms_m")]
    pub align_rms: Option<f64>,
    /// Largest true end-effector error over the dwell window that ended the mission.
    #[serde(rename = "dwell_max_ee_error_m")]
    pub dwell_max_error: Option<f64>,
    /// Mean of (p − true target) over the dwell window.
    #[serde(rename = "standoff_achieved_m")]
    pub standoff_achieved: Option<Vec3>,
    /// Mean of (p − true target) over the second half of the post-Done hold.
    #[serde(rename = "hold_standoff_m")]
    pub hold_standoff: Option<Vec3>,
    pub control_steps: u64,
    #[serde(rename = "sim_time_s")]
    pub sim_time: f64,
    pub final_state: MissionState,
    pub reason: Option<String>,
    pub log_dir: Option<PathBuf>,
}

impl TrialResult {
    /// Done, and the true end-effector error stayed within `threshold` for
    /// the whole dwell window.
    pub fn aligned_within(&self, threshold: f64) -> bool {
        self.outcome == Outcome::Done && self.dwell_max_error.is_some_and(|e| e <= threshold)
    }
}

/// In-memory logs of a trial.
#[derive(Debug, Clone)]
pub struct TrialLogs {
    pub trajectory: CsvBuffer,
    pub transitions: CsvBuffer,
    pub detections: CsvBuffer,
    pub mppi: CsvBuffer,
}

#[derive(Debug, Clone)]
pub struct TrialRun {
    pub result: TrialResult,
    pub logs: TrialLogs,
}

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const TRANSITIONS_FILE: &str = "transitions.csv";
pub const DETECTIONS_FILE: &str = "detections.csv";
pub const MPPI_FILE: &str = "mppi.csv";
pub const RESULT_FILE: &str = "result.json";

struct DwellSample {
    ee_error: f64,
    offset: Vec3,
}

/// Simulates `scenario` with `seed` until Done, Failed, divergence or the
/// duration cap, keeping all logs in memory. After Done the vehicle keeps
/// holding its last setpoint for `sim.hold_after_done_s`.
pub fn simulate(scenario: &Scenario, seed: u64) -> Result<TrialRun, HarnessError> {
    scenario.validate()?;
    let mcfg = scenario.mission.clone();
    let params = scenario.model.clone();
    let dt = scenario.mppi.dt_ctrl;
    let max_steps = (scenario.sim.duration / dt).round() as u64;
    let hold_steps = (scenario.sim.hold_after_done / dt).round() as u64;
    let mut sim = Simulator::new(scenario.clone(), seed).with_detection_log();

    let mut status = MissionStatus::start(&sim.uav, &mcfg, 0.0);
    let mut trajectory = CsvBuffer::new(TRAJECTORY_HEADER);
    let mut transitions = CsvBuffer::new(TRANSITIONS_HEADER);
    let mut mppi_log = CsvBuffer::new(MPPI_HEADER);

    let mut outcome = None;
    let mut reason = None;
    let mut done_step = 0;
    let mut min_err: Option<f64> = None;
    let mut final_err = None;
    let mut align_sq = 0.0;
    let mut align_n = 0u64;
    let mut dwell: VecDeque<DwellSample> = VecDeque::new();
    let mut hold: Vec<Vec3> = Vec::new();
    let mut time_to_done = None;

    loop {
        let k = sim.step_index();
        let time = sim.time();
        let ee = end_effector_world(&sim.uav, &params);
        let world = WorldSnapshot { uav: &sim.uav, ee: &ee, target: sim.estimate.as_ref(), time };
        let prev_state = status.state;
        status = mission_step(&status, &world, &mcfg, &params);
        if let Some(tr) = &status.transition {
            transitions.push(&transition_row(tr));
        }

        let truth = sim.tracked.or(if scenario.targets.is_empty() { None } else { Some(0) });
        let true_target = truth.map(|i| scenario.targets[i]);
        let err = true_target.map(|t| (ee.position - t).norm());

        if outcome.is_none() {
            if let Some(e) = err {
                min_err = Some(min_err.map_or(e, |m: f64| m.min(e)));
            }
            final_err = err;
            let aligning = prev_state == MissionState::Align;
            if aligning && matches!(status.state, MissionState::Align | MissionState::Done) {
                align_sq += (sim.uav.p - status.setpoint.p_des).norm_squared();
                align_n += 1;
            }
            let counted = status.state == MissionState::Done || status.aligned_streak > 0;
            match (aligning && counted, true_target) {
                (true, Some(t)) => {
                    dwell.push_back(DwellSample { ee_error: err.unwrap_or(f64::NAN), offset: sim.uav.p - t });
                    while dwell.len() > mcfg.dwell_steps.max(1) as usize {
                        dwell.pop_front();
                    }
                }
                _ => dwell.clear(),
            }
            match status.state {
                MissionState::Done => {
                    time_to_done = Some(time);
                    done_step = k;
                    outcome = Some(Outcome::Done);
                }
                MissionState::Failed => {
                    outcome = Some(Outcome::Failed);
                    reason = Some("mission timeout".to_string());
                }
                _ if !scenario.sim.arena.contains(&sim.uav.p) => {
                    outcome = Some(Outcome::Failed);
                    reason = Some("left the arena".to_string());
                }
                _ if k >= max_steps => {
                    outcome = Some(Outcome::Failed);
                    reason = Some("duration limit".to_string());
                }
                _ => {}
            }
        } else if let Some(t) = true_target {
            // second half of the post-Done hold
            if 2 * (k - done_step) > hold_steps {
                hold.push(sim.uav.p - t);
            }
        }

        let refresh = sim.estimate.map(|e| e.refreshed(time, mcfg.fresh_window));
        let row_target = true_target.unwrap_or_else(|| Vec3::repeat(f64::NAN));
        let uav = sim.uav;
        let log_row = |control: &ControlInput| {
            TrajectoryRow {
                step: k,
                time,
                state: status.state,
                uav: &uav,
                ee: &ee.position,
                estimate: refresh.as_ref(),
                true_target: &row_target,
                setpoint: &status.setpoint,
                control,
                arm_command: &status.arm_command,
            }
            .to_csv()
        };

        let finished = match outcome {
            Some(Outcome::Done) => k >= done_step + hold_steps,
            Some(_) => true,
            None => false,
        };
        if finished {
            trajectory.push(&log_row(&ControlInput::default()));
            break;
        }
        match sim.advance(&status.setpoint, &status.arm_command) {
            Ok(report) => {
                trajectory.push(&log_row(&report.control));
                mppi_log.push(&mppi_row(k, &report.diagnostics));
            }
            Err(e) => {
                log::warn!("seed {seed}: {e}");
                trajectory.push(&log_row(&ControlInput::default()));
                // a crash while holding after Done still counts as divergence
                outcome = Some(Outcome::Diverged);
                reason = Some(e.to_string());
                break;
            }
        }
    }

    let outcome = outcome.unwrap_or(Outcome::Diverged);
    let done = outcome == Outcome::Done;
    let (dwell_max_error, standoff_achieved) = if done && !dwell.is_empty() {
        let max = dwell.iter().map(|d| d.ee_error).fold(0.0, f64::max);
        let mean = dwell.iter().map(|d| d.offset).sum::<Vec3>() / dwell.len() as f64;
        (Some(max), Some(mean))
    } else {
        (None, None)
    };
    let hold_standoff = (done && !hold.is_empty()).then(|| hold.iter().sum::<Vec3>() / hold.len() as f64);
    let result = TrialResult {
        seed,
        outcome,
        time_to_done,
        final_ee_error: final_err,
        min_ee_error: min_err,
        align_rms: (align_n > 0).then(|| (align_sq / align_n as f64).sqrt()),
        dwell_max_error,
        standoff_achieved,
        hold_standoff,
        control_steps: sim.step_index(),
        sim_time: sim.time(),
        final_state: status.state,
        reason,
        log_dir: None,
    };
    let detections = sim.detection_log().cloned().unwrap_or_else(|| CsvBuffer::new(""));
    Ok(TrialRun {
        result,
        logs: TrialLogs { trajectory, transitions, detections, mppi: mppi_log },
    })
}

impl TrialRun {
    /// Writes the CSV logs and `result.json` into `dir`, recording the
    /// directory in the result.
    pub fn write(&mut self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        self.result.log_dir = Some(dir.to_path_buf());
        let files = [
            (TRAJECTORY_FILE, self.logs.trajectory.as_str()),
            (TRANSITIONS_FILE, self.logs.transitions.as_str()),
            (DETECTIONS_FILE, self.logs.detections.as_str()),
            (MPPI_FILE, self.logs.mppi.as_str()),
        ];
        for (name, text) in files {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        }
        let path = dir.join(RESULT_FILE);
        let json = serde_json::to_string_pretty(&self.result)?;
        fs::write(&path, json + "\n").map_err(|e| HarnessError::io(&path, e))?;
        Ok(())
    }
}

/// Runs one trial and, when `out` is given, writes its logs there.
pub fn run_trial(scenario: &Scenario, seed: u64, out: Option<&Path>) -> Result<TrialResult, HarnessError> {
    let mut run = simulate(scenario, seed)?;
    if let Some(dir) = out {
        run.write(dir)?;
    }
    Ok(run.result)
}
