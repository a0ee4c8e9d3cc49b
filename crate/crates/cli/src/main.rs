use std::path::PathBuf;
use std::process::ExitCode;

use aeromanip::harness::{self, parse_seeds, Outcome};
use aeromanip::{load_scenario, Scenario};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

/// Aerial manipulator simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write its logs.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override the simulated-time cap in seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Run one trial per seed and aggregate (`0..10`, `0..=9`, `1,4,7`).
    Batch {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
        /// Minimum success rate for a zero exit code.
        #[arg(long, default_value_t = 0.8)]
        min_success: f64,
    },
    /// Summarize a batch or trial directory and write approach extracts.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Print a built-in scenario as JSON.
    Scenario {
        #[arg(long, default_value = "default")]
        preset: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { scenario, seed, out, duration } => {
            let mut sc = load_scenario(&scenario)?;
            if let Some(d) = duration {
                if !(d > 0.0 && d.is_finite()) {
                    bail!("--duration must be positive");
                }
                sc.sim.duration = d;
            }
            let result = harness::run_trial(&sc, seed, Some(&out))?;
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(result.outcome == Outcome::Done)
        }
        Command::Batch { scenario, seeds, out, min_success } => {
            let sc = load_scenario(&scenario)?;
            let seeds = parse_seeds(&seeds)?;
            let report = harness::run_batch(&sc, &seeds, Some(&out))?;
            let summary = harness::report(&out)?;
            print!("{}", summary.text);
            Ok(report.success_rate >= min_success)
        }
        Command::Report { input } => {
            let summary = harness::report(&input).with_context(|| format!("reading {}", input.display()))?;
            print!("{}", summary.text);
            Ok(summary.problems.is_empty())
        }
        Command::Scenario { preset } => {
            let Some(sc) = Scenario::preset(&preset) else {
                bail!("unknown preset `{preset}` (available: {})", Scenario::PRESETS.join(", "));
            };
            println!("{}", sc.to_json());
            Ok(true)
        }
    }
}
