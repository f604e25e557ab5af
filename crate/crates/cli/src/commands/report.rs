//! `report`: calibration targets vs. model/observed values.

use std::path::Path;

use hrc_sim::action::AtomicAction;
use hrc_sim::error::{Error, Result};
use hrc_sim::eval::{
    analytic_cycle_rate, detection_success_probability, detection_wait_stats, repetition_decay,
    required_cycle_rate, success_rates, summarize, SuccessRates,
};
use hrc_sim::percept::{REFERENCE_PRECISION, REFERENCE_RECALL};
use hrc_sim::trace::EpisodeTrace;
use hrc_sim::Real;

use crate::config::CliConfigFile;

pub fn run(config: Option<&Path>, traces: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let cfg = match config {
        Some(path) => CliConfigFile::load(path)?,
        None => CliConfigFile::default(),
    };
    cfg.episode.validate()?;
    let model = cfg.episode.recognizer.build()?;
    let priors = cfg.episode.recognizer.priors;
    let achieved_precision = model.achieved_precision(&priors);

    println!("recognizer channel (diagonal = per-class recall):");
    println!(
        "  {:<20} {:>8} {:>8} | {:>10} {:>10}",
        "action", "recall", "model", "precision", "achieved"
    );
    let mut recognizer_rows = Vec::new();
    for (i, action) in AtomicAction::ALL.iter().enumerate() {
        let model_recall = model.confusion()[i][i];
        let achieved = achieved_precision[i];
        println!(
            "  {:<20} {:>8.2} {:>8.2} | {:>10.2} {:>10}",
            action.name(),
            REFERENCE_RECALL[i],
            model_recall,
            REFERENCE_PRECISION[i],
            achieved.map_or("n/a".into(), |p| format!("{p:.2}")),
        );
        recognizer_rows.push(serde_json::json!({
            "action": action.name(),
            "target_recall": REFERENCE_RECALL[i],
            "model_recall": model_recall,
            "reference_precision": REFERENCE_PRECISION[i],
            "achieved_precision": achieved,
        }));
    }

    let q = model.confusion()[AtomicAction::HumanGrasp.index()][AtomicAction::HumanGrasp.index()];
    let window_ticks =
        (cfg.episode.human.retry_timeout_s * cfg.episode.recognizer.frame_rate).round() as u32;
    let h = detection_success_probability(q, window_ticks);
    let wait = detection_wait_stats(q, window_ticks);
    let analytic = analytic_cycle_rate(0.96, h, cfg.episode.human.retry_probability);
    println!("\nhandover detection model:");
    println!("  grasp detection probability per tick: {q:.3}");
    println!("  attempt window: {window_ticks} ticks -> per-attempt success {h:.4}");
    if let Some((mean, sd)) = wait {
        println!(
            "  detection wait (conditional): mean {:.2} s, sd {:.2} s",
            mean / cfg.episode.recognizer.frame_rate,
            sd / cfg.episode.recognizer.frame_rate
        );
    }
    println!("  analytic cycle rate g*(h+(1-h)*p_retry*h): {analytic:.4}");

    let legs = cfg.episode.legs;
    let decay: Real = repetition_decay(analytic, legs)?;
    let needed: Real = required_cycle_rate(0.9, legs)?;
    println!("\nrepetition decay over {legs} cycles:");
    println!("  analytic full-assembly rate: {decay:.4}");
    println!("  cycle rate needed for 90% full assembly: {needed:.4}");

    let mut observed: Option<SuccessRates> = None;
    if let Some(dir) = traces {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::trace(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
            .collect();
        files.sort();
        let mut summaries = Vec::new();
        for file in &files {
            match EpisodeTrace::read_jsonl_path(file).and_then(|t| summarize(&t)) {
                Ok(s) => summaries.push(s),
                Err(e) => eprintln!("warning: skipping {}: {e}", file.display()),
            }
        }
        if summaries.is_empty() {
            return Err(Error::trace("no readable traces for the observed section"));
        }
        let rates = success_rates(&summaries)?;
        let fmt = |r: Option<Real>| r.map_or("n/a".into(), |r| format!("{:.1}%", 100.0 * r));
        println!("\nobserved over {} episodes:", summaries.len());
        println!(
            "  grasp {} | handover {} | cycle {} | full assembly {}",
            fmt(rates.grasp.rate()),
            fmt(rates.handover.rate()),
            fmt(rates.cycle.rate()),
            fmt(rates.full_assembly.rate()),
        );
        if let (Some(cycle), Some(full)) = (rates.cycle.rate(), rates.full_assembly.rate()) {
            let predicted: Real = repetition_decay(cycle, legs)?;
            println!(
                "  decay check: cycle^{legs} = {predicted:.4} vs observed full {full:.4}"
            );
        }
        observed = Some(rates);
    }

    if let Some(path) = out {
        let report = serde_json::json!({
            "recognizer": recognizer_rows,
            "handover_detection": {
                "q": q,
                "window_ticks": window_ticks,
                "per_attempt_success": h,
                "wait_mean_sd_ticks": wait,
            },
            "analytic_cycle_rate": analytic,
            "repetition_decay": {"legs": legs, "full_assembly": decay, "required_for_90": needed},
            "observed": observed,
        });
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
