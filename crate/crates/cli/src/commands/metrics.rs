//! `metrics`: traces in, per-cycle CSV out.

use std::path::{Path, PathBuf};

use hrc_sim::error::{Error, Result};
use hrc_sim::eval::{summarize, write_metrics_csv, EpisodeSummary};
use hrc_sim::trace::EpisodeTrace;

fn collect_trace_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(input)?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

pub fn run(inputs: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let files = collect_trace_files(inputs)?;
    if files.is_empty() {
        return Err(Error::trace("no trace files found"));
    }
    let mut summaries: Vec<EpisodeSummary> = Vec::new();
    let mut failures = 0usize;
    for file in &files {
        match EpisodeTrace::read_jsonl_path(file).and_then(|t| summarize(&t)) {
            Ok(summary) => summaries.push(summary),
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", file.display());
                failures += 1;
            }
        }
    }
    if summaries.is_empty() {
        return Err(Error::trace(format!(
            "all {failures} trace files were unreadable"
        )));
    }
    match out {
        Some(path) => {
            let file = std::fs::File::create(path)?;
            write_metrics_csv(&summaries, std::io::BufWriter::new(file))?;
            eprintln!(
                "wrote {} ({} episodes, {} skipped)",
                path.display(),
                summaries.len(),
                failures
            );
        }
        None => write_metrics_csv(&summaries, std::io::stdout().lock())?,
    }
    Ok(())
}
