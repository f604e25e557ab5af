//! Episode traces and their JSON-Lines persistence.
//!
//! File layout: the first line is a header object carrying the schema
//! version, experiment labels and the fully resolved config snapshot; every
//! following line is one [`SimEvent`]. Field names are stable; a `(config,
//! seed)` pair serializes byte-identically on every run.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::engine::EpisodeConfig;
use crate::error::{Error, Result};
use crate::event::{EpisodeOutcome, EventKind, SimEvent};
use crate::SCHEMA_VERSION;

/// Experiment labels attached to a trace (not part of the episode config).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episode_index: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub participant: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rep: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceHeader {
    schema_version: u32,
    #[serde(default)]
    meta: TraceMeta,
    config: EpisodeConfig,
}

/// A complete episode: resolved config, ordered events, outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub meta: TraceMeta,
    pub config: EpisodeConfig,
    pub events: Vec<SimEvent>,
    pub outcome: EpisodeOutcome,
}

impl EpisodeTrace {
    /// Assemble a trace from raw parts, deriving the outcome from the final
    /// `EpisodeEnd` event and checking the total order.
    pub fn from_events(
        meta: TraceMeta,
        config: EpisodeConfig,
        events: Vec<SimEvent>,
    ) -> Result<Self> {
        let outcome = match events.last().map(|e| &e.kind) {
            Some(EventKind::EpisodeEnd { outcome }) => outcome.clone(),
            _ => return Err(Error::trace("trace does not end with an episode_end event")),
        };
        for pair in events.windows(2) {
            if pair[1].order_key() <= pair[0].order_key() {
                return Err(Error::trace(format!(
                    "events out of order at seq {}",
                    pair[1].seq
                )));
            }
        }
        if events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::EpisodeEnd { .. }))
            .count()
            != 1
        {
            return Err(Error::trace("trace must contain exactly one episode_end"));
        }
        Ok(EpisodeTrace {
            meta,
            config,
            events,
            outcome,
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        let header = TraceHeader {
            schema_version: SCHEMA_VERSION,
            meta: self.meta.clone(),
            config: self.config.clone(),
        };
        serde_json::to_writer(&mut writer, &header)?;
        writer.write_all(b"\n")?;
        for event in &self.events {
            serde_json::to_writer(&mut writer, event)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::trace(format!("non-utf8 trace: {e}")))
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::trace("empty trace file"))??;
        let header: TraceHeader = serde_json::from_str(&header_line)
            .map_err(|e| Error::trace(format!("bad trace header: {e}")))?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(Error::trace(format!(
                "trace schema version {} not supported (expected {SCHEMA_VERSION})",
                header.schema_version
            )));
        }
        // the embedded snapshot must still validate
        header.config.validate()?;
        let mut events = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event: SimEvent = serde_json::from_str(&line)
                .map_err(|e| Error::trace(format!("bad event on line {}: {e}", i + 2)))?;
            events.push(event);
        }
        EpisodeTrace::from_events(header.meta, header.config, events)
    }

    pub fn read_jsonl_path(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::trace(format!("{}: {e}", path.display())))?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }

    pub fn write_jsonl_path(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::trace(format!("{}: {e}", path.display())))?;
        let mut writer = std::io::BufWriter::new(file);
        self.write_jsonl(&mut writer)?;
        writer.flush()?;
        Ok(())
    }
}
