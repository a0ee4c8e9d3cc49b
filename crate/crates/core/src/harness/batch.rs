//! Multi-seed execution and aggregation.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::harness::trial::{run_trial, Outcome, TrialResult};
use crate::harness::{percentile, HarnessError};
use crate::scenario::Scenario;

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

impl Percentiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        Some(Self { p50: percentile(&v, 0.5)?, p90: percentile(&v, 0.9)?, max: *v.last()? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub scenario: String,
    pub trials: Vec<TrialResult>,
    /// Fraction of trials that reached Done.
    pub success_rate: f64,
    #[serde(rename = "median_time_to_done_s")]
    pub median_time_to_done: Option<f64>,
    #[serde(rename = "final_ee_error_m")]
    pub final_error: Option<Percentiles>,
    #[serde(rename = "min_ee_error_m")]
    pub min_error: Option<Percentiles>,
}

impl BatchReport {
    pub fn from_trials(scenario: &str, trials: Vec<TrialResult>) -> Self {
        let n = trials.len().max(1) as f64;
        let done = trials.iter().filter(|t| t.outcome == Outcome::Done).count();
        let mut times: Vec<f64> = trials.iter().filter_map(|t| t.time_to_done).collect();
        times.sort_by(f64::total_cmp);
        let finals: Vec<f64> = trials.iter().filter_map(|t| t.final_ee_error).collect();
        let mins: Vec<f64> = trials.iter().filter_map(|t| t.min_ee_error).collect();
        Self {
            scenario: scenario.to_string(),
            success_rate: done as f64 / n,
            median_time_to_done: percentile(&times, 0.5),
            final_error: Percentiles::of(&finals),
            min_error: Percentiles::of(&mins),
            trials,
        }
    }
}

/// Parses `n..m` (exclusive), `n..=m` (inclusive), a comma list, or a
/// single seed.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, HarnessError> {
    let bad = || HarnessError::Usage(format!("invalid seed list `{text}`"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        text.split(',').map(num).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(HarnessError::Usage(format!("seed list `{text}` is empty")));
    }
    Ok(seeds)
}

pub fn seed_dir_name(seed: u64) -> String {
    format!("seed_{seed}")
}

/// Runs one trial per seed (in parallel across seeds) and aggregates the
/// results in seed order. With `out`, each trial logs into `seed_<n>/` and
/// the report is written to `report.json`.
pub fn run_batch(scenario: &Scenario, seeds: &[u64], out: Option<&Path>) -> Result<BatchReport, HarnessError> {
    if seeds.is_empty() {
        return Err(HarnessError::Usage("at least one seed is required".into()));
    }
    scenario.validate()?;
    let trials = seeds
        .par_iter()
        .map(|&seed| {
            let dir = out.map(|o| o.join(seed_dir_name(seed)));
            run_trial(scenario, seed, dir.as_deref())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = BatchReport::from_trials(&scenario.name, trials);
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let path = dir.join(REPORT_FILE);
        let json = serde_json::to_string_pretty(&report)?;
        fs::write(&path, json + "\n").map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok(report)
}
