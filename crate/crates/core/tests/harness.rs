use std::fs;
use std::path::Path;

use aeromanip::harness::batch::seed_dir_name;
use aeromanip::harness::trial::{DETECTIONS_FILE, MPPI_FILE, RESULT_FILE, TRAJECTORY_FILE, TRANSITIONS_FILE};
use aeromanip::harness::{report, run_batch, run_trial, simulate, Outcome, TrialResult};
use aeromanip::math::Vec3;
use aeromanip::mission::MissionState;
use aeromanip::scenario::Scenario;

const LOG_FILES: [&str; 4] = [TRAJECTORY_FILE, TRANSITIONS_FILE, DETECTIONS_FILE, MPPI_FILE];

fn without_dir(mut r: TrialResult) -> TrialResult {
    r.log_dir = None;
    r
}

fn column(header: &str, name: &str) -> usize {
    header.split(',').position(|c| c == name).unwrap()
}

#[test]
fn written_logs_are_byte_identical_across_runs() {
    let sc = Scenario::default();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_trial(&sc, 11, Some(a.path())).unwrap();
    let rb = run_trial(&sc, 11, Some(b.path())).unwrap();
    assert_eq!(without_dir(ra.clone()), without_dir(rb));
    for name in LOG_FILES {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty(), "{name} is empty");
        assert_eq!(x, y, "{name} differs");
    }
    let stored: TrialResult = serde_json::from_str(&fs::read_to_string(a.path().join(RESULT_FILE)).unwrap()).unwrap();
    assert_eq!(stored, ra);
    assert_eq!(stored.log_dir.as_deref(), Some(a.path()));
}

#[test]
fn different_seeds_give_different_trajectories() {
    let sc = Scenario::default();
    let a = simulate(&sc, 1).unwrap();
    let b = simulate(&sc, 2).unwrap();
    assert_ne!(a.logs.trajectory.as_str(), b.logs.trajectory.as_str());
}

#[test]
fn unreachable_target_fails_on_timeout() {
    let mut sc = Scenario::default();
    // 10 m out, beyond camera range from anywhere on the search pattern
    sc.targets = vec![Vec3::new(-10.0, 0.0, 1.5)];
    sc.sim.arena.min.x = -12.0;
    sc.mission.timeout = 10.0;
    sc.sim.duration = 30.0;
    let run = simulate(&sc, 0).unwrap();
    let r = &run.result;
    assert_eq!(r.outcome, Outcome::Failed);
    assert_eq!(r.final_state, MissionState::Failed);
    assert!(r.time_to_done.is_none() && r.dwell_max_error.is_none());
    assert!(r.reason.is_some());
    assert!(r.sim_time <= 10.0 + 2.0 * sc.mppi.dt_ctrl, "gave up late: {}", r.sim_time);
    let last = run.logs.transitions.as_str().lines().last().unwrap();
    assert!(last.contains(",Failed,"), "last transition: {last}");
}

#[test]
fn duration_cap_ends_the_trial() {
    let mut sc = Scenario::default();
    sc.sim.duration = 1.0;
    let r = simulate(&sc, 0).unwrap().result;
    assert_eq!(r.outcome, Outcome::Failed);
    assert_eq!(r.control_steps, (1.0 / sc.mppi.dt_ctrl).round() as u64);
}

#[test]
fn noiseless_mission_progresses_monotonically() {
    let sc = Scenario::noiseless();
    let run = simulate(&sc, 0).unwrap();
    assert_eq!(run.result.outcome, Outcome::Done);
    let text = run.logs.transitions.as_str();
    let header = text.lines().next().unwrap();
    let (from, to) = (column(header, "from"), column(header, "to"));
    let rank = |s: &str| MissionState::ALL.iter().position(|m| m.to_string() == s).unwrap();
    let mut visited = vec![MissionState::Search.to_string()];
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[from], visited.last().unwrap(), "transition chain broken at {line}");
        assert!(rank(cells[to]) > rank(cells[from]), "backward transition {line}");
        visited.push(cells[to].to_string());
    }
    assert_eq!(visited, ["Search", "Detect", "Approach", "Align", "Done"]);
}

#[test]
fn logs_cover_every_control_step() {
    let sc = Scenario::default();
    let run = simulate(&sc, 4).unwrap();
    let r = &run.result;
    let dt = sc.mppi.dt_ctrl;
    assert_eq!(run.logs.trajectory.rows() as u64, r.control_steps + 1);
    assert_eq!(run.logs.mppi.rows() as u64, r.control_steps);
    assert!((r.sim_time - r.control_steps as f64 * dt).abs() < 1e-9);

    let text = run.logs.trajectory.as_str();
    let header = text.lines().next().unwrap();
    let (step, time) = (column(header, "step"), column(header, "time_s"));
    for (k, line) in text.lines().skip(1).enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), header.split(',').count());
        assert_eq!(cells[step].parse::<usize>().unwrap(), k);
        let t: f64 = cells[time].parse().unwrap();
        assert!((t - k as f64 * dt).abs() < 1e-9);
    }

    // one detection row per camera frame
    let frames = run.logs.detections.rows() as f64;
    let expected = r.sim_time * sc.sim.camera_rate;
    assert!((frames - expected).abs() <= 1.0, "{frames} frames in {} s", r.sim_time);
}

#[test]
fn single_seed_batch_matches_the_trial() {
    let sc = Scenario::default();
    let out = tempfile::tempdir().unwrap();
    let batch = run_batch(&sc, &[6], Some(out.path())).unwrap();
    let trial = simulate(&sc, 6).unwrap();
    assert_eq!(batch.trials.len(), 1);
    assert_eq!(without_dir(batch.trials[0].clone()), trial.result);
    let done = f64::from(u8::from(trial.result.outcome == Outcome::Done));
    assert_eq!(batch.success_rate, done);
    assert_eq!(batch.median_time_to_done, trial.result.time_to_done);
    let seed_dir = out.path().join(seed_dir_name(6));
    assert_eq!(
        fs::read_to_string(seed_dir.join(TRAJECTORY_FILE)).unwrap(),
        trial.logs.trajectory.as_str()
    );
}

fn last_extract_error(path: &Path) -> f64 {
    let text = fs::read_to_string(path).unwrap();
    let header = text.lines().next().unwrap();
    let col = column(header, "ee_error_m");
    let last = text.lines().last().unwrap();
    last.split(',').nth(col).unwrap().parse().unwrap()
}

#[test]
fn report_summarizes_a_batch_and_counts_corrupt_rows() {
    let sc = Scenario::default();
    let out = tempfile::tempdir().unwrap();
    let batch = run_batch(&sc, &[0, 1], Some(out.path())).unwrap();

    let clean = report(out.path()).unwrap();
    assert!(clean.problems.is_empty());
    assert_eq!(clean.skipped_rows, 0);
    assert_eq!(clean.extracts.len(), 2);
    assert_eq!(clean.batch.success_rate, batch.success_rate);
    for (t, path) in batch.trials.iter().zip(&clean.extracts) {
        if t.outcome == Outcome::Done {
            let e = last_extract_error(path);
            assert!(e < 0.05, "seed {} ends {e} m from the target", t.seed);
        }
    }

    let traj = out.path().join(seed_dir_name(1)).join(TRAJECTORY_FILE);
    let mut text = fs::read_to_string(&traj).unwrap();
    text.push_str("12,0.24,Approach,not-a-number\n");
    text.push_str(&"1,".repeat(37));
    text.push_str("x\n");
    fs::write(&traj, text).unwrap();
    fs::write(out.path().join(seed_dir_name(0)).join(RESULT_FILE), "{ truncated").unwrap();

    let dirty = report(out.path()).unwrap();
    assert_eq!(dirty.skipped_rows, 2);
    assert_eq!(dirty.problems.len(), 1);
    assert!(dirty.problems[0].path.ends_with(Path::new("seed_0").join(RESULT_FILE)));
    assert_eq!(dirty.batch.trials.len(), 1);
    assert!(dirty.text.contains("skipped 2 corrupt"));
}

#[test]
fn report_accepts_a_single_trial_directory() {
    let out = tempfile::tempdir().unwrap();
    let r = run_trial(&Scenario::default(), 2, Some(out.path())).unwrap();
    let summary = report(out.path()).unwrap();
    assert_eq!(summary.batch.trials.len(), 1);
    assert_eq!(summary.batch.trials[0], r);
}

#[test]
fn leaving_the_arena_fails_the_trial() {
    let mut sc = Scenario::default();
    // start just under the ceiling with a strong climb
    sc.initial_state.p.z = 2.9;
    sc.initial_state.v = Vec3::new(0.0, 0.0, 3.0);
    let r = simulate(&sc, 0).unwrap().result;
    assert_eq!(r.outcome, Outcome::Failed);
    assert_eq!(r.reason.as_deref(), Some("left the arena"));
}
