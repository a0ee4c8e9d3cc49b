//! Simulation loop, batch execution, metrics and logs.

pub mod batch;
pub mod logs;
pub mod report;
pub mod sim;
pub mod trial;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::scenario::ScenarioError;

pub use batch::{parse_seeds, run_batch, BatchReport, Percentiles};
pub use report::{report, FileProblem, ReportSummary};
pub use sim::{govern_setpoint, ControlReport, SimError, Simulator};
pub use trial::{run_trial, simulate, Outcome, TrialLogs, TrialResult, TrialRun};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

/// Linear-interpolated percentile of an ascending slice, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    match sorted.len() {
        0 => None,
        1 => Some(sorted[0]),
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
        }
    }
}
