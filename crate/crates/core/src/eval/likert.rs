//! Likert questionnaire scoring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::human::HumanMode;
use crate::Real;

pub const LIKERT_ITEM_COUNT: usize = 5;

/// Questionnaire items, in fixed column order. Comfort is asked as
/// discomfort and reverse-coded on scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikertItem {
    Fluency,
    EaseOfUse,
    Trust,
    Comfort,
    Capability,
}

impl LikertItem {
    pub const ALL: [LikertItem; LIKERT_ITEM_COUNT] = [
        LikertItem::Fluency,
        LikertItem::EaseOfUse,
        LikertItem::Trust,
        LikertItem::Comfort,
        LikertItem::Capability,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&i| i == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            LikertItem::Fluency => "fluency",
            LikertItem::EaseOfUse => "ease_of_use",
            LikertItem::Trust => "trust",
            LikertItem::Comfort => "comfort",
            LikertItem::Capability => "capability",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|i| i.name() == name)
            .ok_or_else(|| Error::config(format!("unknown likert item {name:?}")))
    }

    /// Reverse-coded items map r to 8 - r on the 7-point scale.
    pub fn reversed(self) -> bool {
        self == LikertItem::Comfort
    }
}

/// One questionnaire answer on the 1..7 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertResponse {
    pub participant: u32,
    pub item: LikertItem,
    pub rating: u8,
    pub mode: HumanMode,
}

/// Scored matrix: one row per (participant, mode), columns in item order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertMatrix {
    pub rows: Vec<(u32, HumanMode)>,
    pub data: Vec<Vec<Real>>,
}

impl LikertMatrix {
    /// Rows restricted to one mode.
    pub fn mode_rows(&self, mode: HumanMode) -> Vec<Vec<Real>> {
        self.rows
            .iter()
            .zip(&self.data)
            .filter(|((_, m), _)| *m == mode)
            .map(|(_, row)| row.clone())
            .collect()
    }

    /// Paired per-item ratings (vision, voice) for participants present in
    /// both modes.
    pub fn paired_item(&self, item: LikertItem) -> Vec<(Real, Real)> {
        let col = item.index();
        let mut pairs = Vec::new();
        for (i, &(p, mode)) in self.rows.iter().enumerate() {
            if mode != HumanMode::Vision {
                continue;
            }
            if let Some(j) = self
                .rows
                .iter()
                .position(|&(q, m)| q == p && m == HumanMode::VoiceCommand)
            {
                pairs.push((self.data[i][col], self.data[j][col]));
            }
        }
        pairs
    }
}

/// Score raw responses into a complete matrix.
///
/// Comfort ratings are reversed (r' = 8 - r); every (participant, mode) must
/// answer all items exactly once.
pub fn score_likert(responses: &[LikertResponse]) -> Result<LikertMatrix> {
    use std::collections::BTreeMap;
    let mut cells: BTreeMap<(u32, u8), [Option<Real>; LIKERT_ITEM_COUNT]> = BTreeMap::new();
    let mode_key = |m: HumanMode| match m {
        HumanMode::Vision => 0u8,
        HumanMode::VoiceCommand => 1u8,
    };
    for r in responses {
        if !(1..=7).contains(&r.rating) {
            return Err(Error::config(format!(
                "rating {} out of the 1..7 scale (participant {}, {})",
                r.rating,
                r.participant,
                r.item.name()
            )));
        }
        let entry = cells.entry((r.participant, mode_key(r.mode))).or_default();
        let slot = &mut entry[r.item.index()];
        if slot.is_some() {
            return Err(Error::config(format!(
                "duplicate response for participant {}, item {}, mode {:?}",
                r.participant,
                r.item.name(),
                r.mode
            )));
        }
        let value = if r.item.reversed() {
            8.0 - r.rating as Real
        } else {
            r.rating as Real
        };
        *slot = Some(value);
    }
    let mut rows = Vec::new();
    let mut data = Vec::new();
    for ((participant, mode_key), slots) in cells {
        let mode = if mode_key == 0 {
            HumanMode::Vision
        } else {
            HumanMode::VoiceCommand
        };
        let mut row = Vec::with_capacity(LIKERT_ITEM_COUNT);
        for (i, slot) in slots.iter().enumerate() {
            match slot {
                Some(v) => row.push(*v),
                None => {
                    return Err(Error::config(format!(
                        "participant {participant} ({mode:?}) is missing item {}",
                        LikertItem::ALL[i].name()
                    )))
                }
            }
        }
        rows.push((participant, mode));
        data.push(row);
    }
    Ok(LikertMatrix { rows, data })
}

/// Read responses from CSV with header `participant,mode,item,rating`.
pub fn likert_from_csv<R: std::io::Read>(reader: R) -> Result<Vec<LikertResponse>> {
    let mut r = csv::Reader::from_reader(reader);
    {
        let headers = r.headers()?;
        let expected = ["participant", "mode", "item", "rating"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::config(format!(
                "likert CSV header must be {expected:?}, got {headers:?}"
            )));
        }
    }
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let field = |i: usize| -> Result<&str> {
            record
                .get(i)
                .ok_or_else(|| Error::config("short likert CSV row"))
        };
        let participant: u32 = field(0)?
            .parse()
            .map_err(|e| Error::config(format!("bad participant id: {e}")))?;
        let mode = match field(1)? {
            "vision" => HumanMode::Vision,
            "voice" | "voice_command" => HumanMode::VoiceCommand,
            other => return Err(Error::config(format!("unknown mode {other:?}"))),
        };
        let item = LikertItem::from_name(field(2)?)?;
        let rating: u8 = field(3)?
            .parse()
            .map_err(|e| Error::config(format!("bad rating: {e}")))?;
        out.push(LikertResponse {
            participant,
            item,
            rating,
            mode,
        });
    }
    Ok(out)
}
