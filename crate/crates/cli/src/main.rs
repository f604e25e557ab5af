//! Operator surface for the collaborative-assembly simulator.
//!
//! Subcommands: `simulate` runs batch experiments and writes traces,
//! `metrics` turns traces into a per-cycle CSV, `stats` runs the paired
//! Wilcoxon / questionnaire analyses, `report` prints the calibration and
//! success-rate summary. Exit codes: 0 ok, 1 runtime failure, 2 config or
//! validation error.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (trace schema 1)");

#[derive(Parser)]
#[command(name = "hrc-sim", version = VERSION, about = "Deterministic simulator of a vision-guided human-robot collaborative assembly cell")]
struct Cli {
    #[command(subcommand)]
    command: CommandLine,
}

#[derive(Subcommand)]
enum CommandLine {
    /// Run episodes and write trace files plus a summary.
    Simulate {
        /// JSON config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of episodes (overrides experiment.repetitions).
        #[arg(long)]
        episodes: Option<u32>,
        /// Base seed (overrides experiment.seed_base).
        #[arg(long)]
        seed: Option<u64>,
        /// Handover mode: vision or voice.
        #[arg(long)]
        mode: Option<String>,
        /// Run both modes with common random numbers.
        #[arg(long)]
        paired: bool,
        /// Participant groups for paired runs.
        #[arg(long)]
        participants: Option<u32>,
        /// Repetitions per participant for paired runs.
        #[arg(long)]
        reps: Option<u32>,
        /// Output directory (overrides experiment.out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dotted-path config overrides, e.g. episode.servo.gain=1.5.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Write per-tick servo grids of a single episode to this JSONL file.
        #[arg(long)]
        grid_dump: Option<PathBuf>,
    },
    /// Extract per-cycle metrics from trace files into CSV.
    Metrics {
        /// Trace files or directories containing *.jsonl traces.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Statistical reports: paired metrics comparison or questionnaire.
    Stats {
        /// Metrics CSV for the first condition (e.g. vision).
        #[arg(long)]
        metrics_a: Option<PathBuf>,
        /// Metrics CSV for the second condition (e.g. voice).
        #[arg(long)]
        metrics_b: Option<PathBuf>,
        /// Likert responses CSV (participant,mode,item,rating).
        #[arg(long)]
        likert: Option<PathBuf>,
        /// Output JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibration and success-rate report.
    Report {
        /// JSON config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trace directory for observed rates (optional).
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Output JSON path; stdout text otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        CommandLine::Simulate {
            config,
            episodes,
            seed,
            mode,
            paired,
            participants,
            reps,
            out,
            overrides,
            grid_dump,
        } => commands::simulate::run(commands::simulate::Args {
            config,
            episodes,
            seed,
            mode,
            paired,
            participants,
            reps,
            out,
            overrides,
            grid_dump,
        }),
        CommandLine::Metrics { traces, out } => commands::metrics::run(&traces, out.as_deref()),
        CommandLine::Stats {
            metrics_a,
            metrics_b,
            likert,
            out,
        } => commands::stats::run(
            metrics_a.as_deref(),
            metrics_b.as_deref(),
            likert.as_deref(),
            out.as_deref(),
        ),
        CommandLine::Report {
            config,
            traces,
            out,
        } => commands::report::run(config.as_deref(), traces.as_deref(), out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
