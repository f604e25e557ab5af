//! `simulate`: run experiments, write traces and summary.json.

use std::path::{Path, PathBuf};

use hrc_sim::engine::{
    run_episode_observed, run_experiment_with_sink, run_paired_experiment_with_sink,
    EpisodeObserver, ExperimentResults,
};
use hrc_sim::error::{Error, Result};
use hrc_sim::eval::{success_rates, EpisodeSummary, SuccessRates};
use hrc_sim::human::HumanMode;
use hrc_sim::servo::{write_grid_dump, LyapunovGrid};
use hrc_sim::{Real, SimTime, SCHEMA_VERSION};

use crate::config::{apply_overrides, parse_mode, CliConfigFile};

pub struct Args {
    pub config: Option<PathBuf>,
    pub episodes: Option<u32>,
    pub seed: Option<u64>,
    pub mode: Option<String>,
    pub paired: bool,
    pub participants: Option<u32>,
    pub reps: Option<u32>,
    pub out: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub grid_dump: Option<PathBuf>,
}

#[derive(serde::Serialize)]
struct ModeSummary {
    success_rates: SuccessRates,
    episodes: usize,
    mean_handover_time_s: Option<Real>,
    mean_cycle_time_s: Option<Real>,
    fluency: Fluency,
}

#[derive(serde::Serialize)]
struct Fluency {
    h_idle: Option<Real>,
    r_idle: Option<Real>,
    c_act: Option<Real>,
}

fn mode_summary(episodes: &[EpisodeSummary]) -> Result<ModeSummary> {
    let rates = success_rates(episodes)?;
    let cycles: Vec<_> = episodes.iter().flat_map(|e| e.cycles.iter()).collect();
    let mean_of = |values: Vec<Real>| {
        (!values.is_empty()).then(|| values.iter().sum::<Real>() / values.len() as Real)
    };
    Ok(ModeSummary {
        success_rates: rates,
        episodes: episodes.len(),
        mean_handover_time_s: mean_of(cycles.iter().filter_map(|c| c.handover_time_s).collect()),
        mean_cycle_time_s: mean_of(
            cycles
                .iter()
                .filter(|c| c.succeeded)
                .map(|c| c.cycle_time_s)
                .collect(),
        ),
        fluency: Fluency {
            h_idle: mean_of(cycles.iter().map(|c| c.h_idle_ratio).collect()),
            r_idle: mean_of(cycles.iter().map(|c| c.r_idle_ratio).collect()),
            c_act: mean_of(cycles.iter().map(|c| c.c_act_ratio).collect()),
        },
    })
}

struct GridDumpObserver {
    writer: std::io::BufWriter<std::fs::File>,
}

impl EpisodeObserver for GridDumpObserver {
    fn on_grid(&mut self, time: SimTime, grid: &LyapunovGrid) {
        // dump failures should not abort the episode; surface them and go on
        if let Err(e) = write_grid_dump(&mut self.writer, time, grid) {
            eprintln!("warning: grid dump write failed: {e}");
        }
    }
}

pub fn run(args: Args) -> Result<()> {
    let mut raw = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::config(format!("{}: {e}", path.display())))?
        }
        None => serde_json::json!({}),
    };
    raw = apply_overrides(raw, &args.overrides)?;
    let mut cfg = CliConfigFile::from_value(raw)?;

    if let Some(n) = args.episodes {
        cfg.experiment.repetitions = n;
    }
    if let Some(seed) = args.seed {
        cfg.experiment.seed_base = seed;
    }
    if let Some(mode) = &args.mode {
        cfg.episode.human.mode = parse_mode(mode)?;
    }
    if args.paired {
        cfg.experiment.paired = true;
    }
    if let Some(p) = args.participants {
        cfg.experiment.participants = Some(p);
    }
    if let Some(r) = args.reps {
        cfg.experiment.reps_per_participant = Some(r);
    }
    if let Some(out) = &args.out {
        cfg.experiment.out_dir = Some(out.display().to_string());
    }
    cfg.validate()?;

    let out_dir = cfg
        .experiment
        .out_dir
        .clone()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    std::fs::create_dir_all(&out_dir)?;

    if let Some(dump_path) = &args.grid_dump {
        return run_grid_dump(&cfg, dump_path, &out_dir);
    }

    let mut episode_cfg = cfg.episode.clone();
    episode_cfg.seed = cfg.experiment.seed_base;

    let summary_value = if cfg.experiment.paired {
        let participants = cfg.experiment.participants.unwrap();
        let reps = cfg.experiment.reps_per_participant.unwrap();
        let results = run_paired_experiment_with_sink(
            &episode_cfg,
            participants,
            reps,
            cfg.experiment.seed_base,
            |mode, trace| {
                let name = hrc_sim::engine::trace_file_name(mode, &trace.meta);
                trace.write_jsonl_path(&out_dir.join(name))
            },
        )?;
        let vision = mode_summary(&results.vision.episodes)?;
        let voice = mode_summary(&results.voice.episodes)?;
        print_mode("vision", &vision);
        print_mode("voice", &voice);
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "paired": true,
            "participants": participants,
            "reps_per_participant": reps,
            "modes": {"vision": vision, "voice": voice},
            "pairs": results.pairs,
            "config": cfg,
        })
    } else {
        let mode = cfg.episode.human.mode;
        let results: ExperimentResults = run_experiment_with_sink(
            &episode_cfg,
            cfg.experiment.repetitions,
            cfg.experiment.seed_base,
            |trace| {
                let name = hrc_sim::engine::trace_file_name(mode, &trace.meta);
                trace.write_jsonl_path(&out_dir.join(name))
            },
        )?;
        let summary = mode_summary(&results.episodes)?;
        let label = match mode {
            HumanMode::Vision => "vision",
            HumanMode::VoiceCommand => "voice",
        };
        print_mode(label, &summary);
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "paired": false,
            "modes": {label: summary},
            "config": cfg,
        })
    };

    let summary_path = out_dir.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary_value)?)?;
    println!("wrote {}", summary_path.display());
    Ok(())
}

fn run_grid_dump(cfg: &CliConfigFile, dump_path: &Path, out_dir: &Path) -> Result<()> {
    if cfg.experiment.repetitions != 1 || cfg.experiment.paired {
        return Err(Error::config(
            "--grid-dump records a single episode; use --episodes 1 and no --paired",
        ));
    }
    let mut episode_cfg = cfg.episode.clone();
    episode_cfg.seed = cfg.experiment.seed_base;
    let file = std::fs::File::create(dump_path)?;
    let mut observer = GridDumpObserver {
        writer: std::io::BufWriter::new(file),
    };
    let trace = run_episode_observed(&episode_cfg, &mut observer)?;
    use std::io::Write;
    observer.writer.flush()?;
    let name = hrc_sim::engine::trace_file_name(episode_cfg.human.mode, &trace.meta);
    trace.write_jsonl_path(&out_dir.join(&name))?;
    println!(
        "wrote {} and grid dump {}",
        out_dir.join(&name).display(),
        dump_path.display()
    );
    Ok(())
}

fn print_mode(label: &str, s: &ModeSummary) {
    let fmt_rate = |r: Option<Real>| match r {
        Some(r) => format!("{:.1}%", 100.0 * r),
        None => "n/a".to_string(),
    };
    println!(
        "{label}: {} episodes | grasp {} | handover {} | cycle {} | full assembly {}",
        s.episodes,
        fmt_rate(s.success_rates.grasp.rate()),
        fmt_rate(s.success_rates.handover.rate()),
        fmt_rate(s.success_rates.cycle.rate()),
        fmt_rate(s.success_rates.full_assembly.rate()),
    );
}
