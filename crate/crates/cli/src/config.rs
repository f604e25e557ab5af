//! Config file loading and dotted-path overrides.

use hrc_sim::engine::EpisodeConfig;
use hrc_sim::error::{Error, Result};
use hrc_sim::human::HumanMode;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Experiment block: how many episodes, seeding, pairing, output location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub repetitions: u32,
    pub seed_base: u64,
    /// When set (with `reps_per_participant`), episodes are grouped by
    /// participant; required for paired runs.
    pub participants: Option<u32>,
    pub reps_per_participant: Option<u32>,
    /// Run both modes with common random numbers.
    pub paired: bool,
    pub out_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            repetitions: 1,
            seed_base: 0,
            participants: None,
            reps_per_participant: None,
            paired: false,
            out_dir: None,
        }
    }
}

/// Top-level config file: the episode parameters plus the experiment block.
/// Unknown keys anywhere are rejected; all defaults are materialized into
/// the trace's config snapshot.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfigFile {
    pub episode: EpisodeConfig,
    pub experiment: ExperimentConfig,
}

impl CliConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::from_value(
            serde_json::from_str(&text)
                .map_err(|e| Error::config(format!("{}: {e}", path.display())))?,
        )
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::config(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.episode.validate()?;
        if self.experiment.repetitions < 1 {
            return Err(Error::config("experiment.repetitions must be at least 1"));
        }
        if self.experiment.paired
            && (self.experiment.participants.is_none()
                || self.experiment.reps_per_participant.is_none())
        {
            return Err(Error::config(
                "paired experiments need experiment.participants and experiment.reps_per_participant",
            ));
        }
        Ok(())
    }
}

/// Apply `key=value` overrides with dotted paths (e.g.
/// `episode.servo.noise.sigma_value=0`) onto the raw JSON before
/// deserialization, so unknown keys still get rejected.
pub fn apply_overrides(mut value: serde_json::Value, overrides: &[String]) -> Result<serde_json::Value> {
    for spec in overrides {
        let (path, raw) = spec
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override {spec:?} is not key=value")))?;
        let leaf: serde_json::Value = match serde_json::from_str(raw) {
            Ok(v) => v,
            Err(_) => serde_json::Value::String(raw.to_string()),
        };
        let segments: Vec<&str> = path.split('.').collect();
        if segments.iter().any(|s| s.is_empty()) {
            return Err(Error::config(format!(
                "override {spec:?} has an empty path segment"
            )));
        }
        set_path(&mut value, &segments, leaf)
            .map_err(|_| Error::config(format!("override path {path:?} crosses a non-object")))?;
    }
    Ok(value)
}

fn set_path(
    node: &mut serde_json::Value,
    segments: &[&str],
    leaf: serde_json::Value,
) -> std::result::Result<(), ()> {
    let map = node.as_object_mut().ok_or(())?;
    match segments {
        [last] => {
            map.insert(last.to_string(), leaf);
            Ok(())
        }
        [head, rest @ ..] => {
            let child = map
                .entry(head.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
            set_path(child, rest, leaf)
        }
        [] => Err(()),
    }
}

pub fn parse_mode(s: &str) -> Result<HumanMode> {
    match s {
        "vision" => Ok(HumanMode::Vision),
        "voice" | "voice_command" => Ok(HumanMode::VoiceCommand),
        other => Err(Error::config(format!(
            "mode must be vision or voice, got {other:?}"
        ))),
    }
}
