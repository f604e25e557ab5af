//! `stats`: paired Wilcoxon over metrics CSVs, or questionnaire analysis.

use std::collections::BTreeMap;
use std::path::Path;

use hrc_sim::error::{Error, Result};
use hrc_sim::eval::{
    cronbach_alpha, likert_from_csv, read_metrics_csv, score_likert, wilcoxon_signed_rank,
    LikertItem, MetricsRow, WilcoxonResult,
};
use hrc_sim::human::HumanMode;
use hrc_sim::Real;

/// Per-participant means of the paired quantities.
struct ParticipantMeans {
    handover: Option<Real>,
    cycle: Option<Real>,
}

fn participant_means(rows: &[MetricsRow]) -> BTreeMap<String, ParticipantMeans> {
    let mut grouped: BTreeMap<String, (Vec<Real>, Vec<Real>)> = BTreeMap::new();
    for row in rows {
        let key = if row.participant.is_empty() {
            row.episode.clone()
        } else {
            row.participant.clone()
        };
        let entry = grouped.entry(key).or_default();
        if let Some(h) = row.handover_time_s {
            entry.0.push(h);
        }
        if row.succeeded {
            entry.1.push(row.cycle_time_s);
        }
    }
    grouped
        .into_iter()
        .map(|(key, (handover, cycle))| {
            let mean = |v: &[Real]| (!v.is_empty()).then(|| v.iter().sum::<Real>() / v.len() as Real);
            (
                key,
                ParticipantMeans {
                    handover: mean(&handover),
                    cycle: mean(&cycle),
                },
            )
        })
        .collect()
}

fn paired_metrics_report(a: &Path, b: &Path) -> Result<serde_json::Value> {
    let rows_a = read_metrics_csv(std::io::BufReader::new(std::fs::File::open(a)?))?;
    let rows_b = read_metrics_csv(std::io::BufReader::new(std::fs::File::open(b)?))?;
    let means_a = participant_means(&rows_a);
    let means_b = participant_means(&rows_b);

    let keys_a: Vec<&String> = means_a.keys().collect();
    let keys_b: Vec<&String> = means_b.keys().collect();
    if keys_a != keys_b {
        let only_a: Vec<&&String> = keys_a.iter().filter(|k| !keys_b.contains(k)).collect();
        let only_b: Vec<&&String> = keys_b.iter().filter(|k| !keys_a.contains(k)).collect();
        return Err(Error::config(format!(
            "participant keys do not match: only in A {only_a:?}, only in B {only_b:?}"
        )));
    }

    let collect_pairs = |f: &dyn Fn(&ParticipantMeans) -> Option<Real>| -> Vec<(Real, Real)> {
        means_a
            .iter()
            .filter_map(|(key, ma)| {
                let mb = &means_b[key];
                Some((f(ma)?, f(mb)?))
            })
            .collect()
    };
    let handover_pairs = collect_pairs(&|m| m.handover);
    let cycle_pairs = collect_pairs(&|m| m.cycle);

    let test = |pairs: &[(Real, Real)]| -> Result<Option<WilcoxonResult>> {
        if pairs.is_empty() {
            return Ok(None);
        }
        wilcoxon_signed_rank(pairs).map(Some)
    };
    Ok(serde_json::json!({
        "participants": keys_a,
        "handover_time": {
            "n_pairs": handover_pairs.len(),
            "wilcoxon": test(&handover_pairs)?,
        },
        "cycle_time": {
            "n_pairs": cycle_pairs.len(),
            "wilcoxon": test(&cycle_pairs)?,
        },
    }))
}

fn likert_report(path: &Path) -> Result<serde_json::Value> {
    let responses = likert_from_csv(std::io::BufReader::new(std::fs::File::open(path)?))?;
    let matrix = score_likert(&responses)?;
    let overall = cronbach_alpha(&matrix.data)?;
    let alpha_if_deleted: BTreeMap<&str, Option<f64>> = LikertItem::ALL
        .iter()
        .zip(&overall.alpha_if_deleted)
        .map(|(item, alpha)| (item.name(), *alpha))
        .collect();

    // per-item paired test between the modes when both are present
    let mut per_item = BTreeMap::new();
    let has_both = matrix.rows.iter().any(|(_, m)| *m == HumanMode::Vision)
        && matrix
            .rows
            .iter()
            .any(|(_, m)| *m == HumanMode::VoiceCommand);
    if has_both {
        for item in LikertItem::ALL {
            let pairs = matrix.paired_item(item);
            if !pairs.is_empty() {
                per_item.insert(item.name(), wilcoxon_signed_rank(&pairs)?);
            }
        }
    }
    Ok(serde_json::json!({
        "respondent_rows": matrix.rows.len(),
        "cronbach_alpha": overall.alpha,
        "alpha_if_deleted": alpha_if_deleted,
        "per_item_mode_wilcoxon": per_item,
    }))
}

pub fn run(
    metrics_a: Option<&Path>,
    metrics_b: Option<&Path>,
    likert: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let report = match (metrics_a, metrics_b, likert) {
        (Some(a), Some(b), None) => paired_metrics_report(a, b)?,
        (None, None, Some(l)) => likert_report(l)?,
        _ => {
            return Err(Error::config(
                "stats needs either --metrics-a with --metrics-b, or --likert",
            ))
        }
    };
    let text = serde_json::to_string_pretty(&report)?;
    match out {
        Some(path) => {
            std::fs::write(path, &text)?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}
