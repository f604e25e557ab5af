//! The closed vocabulary of atomic human actions.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// One of the eight atomic actions composing an assembly, in fixed order.
///
/// The order and the serialized lower_snake_case names are stable: they key
/// confusion-matrix rows/columns, trace payloads and CSV headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomicAction {
    NoAssemblyAction,
    Reach,
    FlipTabletop,
    FlipTable,
    SpinLeg,
    AlignLeg,
    RotateTable,
    HumanGrasp,
}

/// Number of atomic action classes.
pub const ACTION_COUNT: usize = 8;

impl AtomicAction {
    /// All actions, in enumeration order.
    pub const ALL: [AtomicAction; ACTION_COUNT] = [
        AtomicAction::NoAssemblyAction,
        AtomicAction::Reach,
        AtomicAction::FlipTabletop,
        AtomicAction::FlipTable,
        AtomicAction::SpinLeg,
        AtomicAction::AlignLeg,
        AtomicAction::RotateTable,
        AtomicAction::HumanGrasp,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&a| a == self).unwrap()
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::config(format!("action index {i} out of range 0..{ACTION_COUNT}")))
    }

    /// Stable string name, identical to the serde form.
    pub fn name(self) -> &'static str {
        match self {
            AtomicAction::NoAssemblyAction => "no_assembly_action",
            AtomicAction::Reach => "reach",
            AtomicAction::FlipTabletop => "flip_tabletop",
            AtomicAction::FlipTable => "flip_table",
            AtomicAction::SpinLeg => "spin_leg",
            AtomicAction::AlignLeg => "align_leg",
            AtomicAction::RotateTable => "rotate_table",
            AtomicAction::HumanGrasp => "human_grasp",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|a| a.name() == name)
            .ok_or_else(|| Error::config(format!("unknown action name {name:?}")))
    }
}

impl fmt::Display for AtomicAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serialization_round_trips_exactly() {
        for (i, a) in AtomicAction::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(AtomicAction::from_index(i).unwrap(), *a);
            let json = serde_json::to_string(a).unwrap();
            assert_eq!(json, format!("\"{}\"", a.name()));
            let back: AtomicAction = serde_json::from_str(&json).unwrap();
            assert_eq!(back, *a);
            assert_eq!(AtomicAction::from_name(a.name()).unwrap(), *a);
        }
        assert!(AtomicAction::from_name("jump").is_err());
        assert!(AtomicAction::from_index(8).is_err());
    }
}
