//! Offline summary of a batch (or single-trial) output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::harness::batch::{BatchReport, Percentiles};
use crate::harness::logs::{fmt9, CsvBuffer, TRAJECTORY_COLUMNS, TRAJECTORY_HEADER};
use crate::harness::trial::{Outcome, TrialResult, RESULT_FILE, TRAJECTORY_FILE};
use crate::harness::HarnessError;
use crate::mission::MissionState;

pub const EXTRACTS_DIR: &str = "extracts";
pub const EXTRACT_HEADER: &str = "time_s,state,px_m,py_m,pz_m,ee_x_m,ee_y_m,ee_z_m,true_x_m,true_y_m,true_z_m,ee_error_m";

/// A log file that could not be used.
#[derive(Debug, Clone, PartialEq)]
pub struct FileProblem {
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ReportSummary {
    pub batch: BatchReport,
    pub problems: Vec<FileProblem>,
    /// Trajectory rows that failed to parse and were skipped.
    pub skipped_rows: usize,
    pub extracts: Vec<PathBuf>,
    pub text: String,
}

struct Extract {
    rows: CsvBuffer,
    skipped: usize,
}

fn column(name: &str) -> usize {
    TRAJECTORY_HEADER.split(',').position(|c| c == name).expect("known column")
}

/// Keeps rows from the first Approach step onward, with the true
/// end-effector error appended.
fn approach_extract(text: &str) -> Extract {
    let (t, st) = (column("time_s"), column("state"));
    let p = column("px_m");
    let ee = column("ee_x_m");
    let tr = column("true_x_m");
    let mut rows = CsvBuffer::new(EXTRACT_HEADER);
    let mut skipped = 0;
    let mut started = false;
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != TRAJECTORY_COLUMNS {
            skipped += 1;
            continue;
        }
        let Ok(state) = cells[st].parse::<MissionState>() else {
            skipped += 1;
            continue;
        };
        let nums: Option<Vec<f64>> = [t, p, p + 1, p + 2, ee, ee + 1, ee + 2, tr, tr + 1, tr + 2]
            .iter()
            .map(|&i| cells[i].parse::<f64>().ok())
            .collect();
        let Some(n) = nums else {
            skipped += 1;
            continue;
        };
        started |= state == MissionState::Approach;
        if !started {
            continue;
        }
        let err = ((n[4] - n[7]).powi(2) + (n[5] - n[8]).powi(2) + (n[6] - n[9]).powi(2)).sqrt();
        let mut row = format!("{},{}", cells[t], state);
        for v in &n[1..] {
            row.push(',');
            row.push_str(&fmt9(*v));
        }
        row.push(',');
        row.push_str(&fmt9(err));
        rows.push(&row);
    }
    Extract { rows, skipped }
}

fn trial_dirs(root: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if root.join(RESULT_FILE).exists() || root.join(TRAJECTORY_FILE).exists() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<(u64, PathBuf)> = fs::read_dir(root)
        .map_err(|e| HarnessError::io(root, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            let seed = name.strip_prefix("seed_")?.parse().ok()?;
            Some((seed, e.path()))
        })
        .collect();
    dirs.sort();
    Ok(dirs.into_iter().map(|(_, p)| p).collect())
}

/// Summarizes every trial under `root`, writing approach extracts into
/// `root/extracts/`. Unreadable files are reported individually.
pub fn report(root: &Path) -> Result<ReportSummary, HarnessError> {
    let dirs = trial_dirs(root)?;
    if dirs.is_empty() {
        return Err(HarnessError::Usage(format!("no trial directories under {}", root.display())));
    }
    let mut problems = Vec::new();
    let mut trials = Vec::new();
    let mut extracts = Vec::new();
    let mut skipped_rows = 0;
    let extract_dir = root.join(EXTRACTS_DIR);

    for dir in &dirs {
        let result_path = dir.join(RESULT_FILE);
        let result = fs::read_to_string(&result_path)
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str::<TrialResult>(&s).map_err(|e| e.to_string()));
        let seed = match result {
            Ok(r) => {
                let seed = r.seed;
                trials.push(r);
                Some(seed)
            }
            Err(message) => {
                problems.push(FileProblem { path: result_path, message });
                None
            }
        };

        let traj_path = dir.join(TRAJECTORY_FILE);
        match fs::read_to_string(&traj_path) {
            Ok(text) => {
                let ex = approach_extract(&text);
                skipped_rows += ex.skipped;
                if ex.skipped > 0 {
                    log::warn!("{}: skipped {} corrupt rows", traj_path.display(), ex.skipped);
                }
                let name = match seed {
                    Some(s) => format!("seed_{s}_approach.csv"),
                    None => format!("{}_approach.csv", dir.file_name().map_or("trial".into(), |n| n.to_string_lossy())),
                };
                fs::create_dir_all(&extract_dir).map_err(|e| HarnessError::io(&extract_dir, e))?;
                let path = extract_dir.join(name);
                fs::write(&path, ex.rows.as_str()).map_err(|e| HarnessError::io(&path, e))?;
                extracts.push(path);
            }
            Err(e) => problems.push(FileProblem { path: traj_path, message: e.to_string() }),
        }
    }

    let batch = BatchReport::from_trials(&root.display().to_string(), trials);
    let text = render(&batch, &problems, skipped_rows);
    Ok(ReportSummary { batch, problems, skipped_rows, extracts, text })
}

fn opt(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.digits$}"))
}

fn render(batch: &BatchReport, problems: &[FileProblem], skipped: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>6}  {:<8}  {:>9}  {:>10}  {:>10}  {:>10}", "seed", "outcome", "t_done_s", "final_m", "min_m", "align_rms_m");
    for t in &batch.trials {
        let outcome = match t.outcome {
            Outcome::Done => "Done",
            Outcome::Failed => "Failed",
            Outcome::Diverged => "Diverged",
        };
        let _ = writeln!(
            s,
            "{:>6}  {:<8}  {:>9}  {:>10}  {:>10}  {:>10}",
            t.seed,
            outcome,
            opt(t.time_to_done, 2),
            opt(t.final_ee_error, 4),
            opt(t.min_ee_error, 4),
            opt(t.align_rms, 4),
        );
    }
    let done = batch.trials.iter().filter(|t| t.outcome == Outcome::Done).count();
    let _ = writeln!(s);
    let _ = writeln!(s, "trials: {}  done: {}  success rate: {:.3}", batch.trials.len(), done, batch.success_rate);
    let _ = writeln!(s, "median time to done: {} s", opt(batch.median_time_to_done, 2));
    let pct = |p: &Option<Percentiles>| {
        p.as_ref().map_or("-".to_string(), |p| format!("p50 {:.4}  p90 {:.4}  max {:.4}", p.p50, p.p90, p.max))
    };
    let _ = writeln!(s, "final ee error (m): {}", pct(&batch.final_error));
    let _ = writeln!(s, "min ee error (m):   {}", pct(&batch.min_error));
    if skipped > 0 {
        let _ = writeln!(s, "warning: skipped {skipped} corrupt trajectory rows");
    }
    for p in problems {
        let _ = writeln!(s, "error: {}: {}", p.path.display(), p.message);
    }
    s
}
