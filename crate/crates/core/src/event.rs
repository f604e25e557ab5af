//! The trace atom: timestamped records of every state change, perception
//! output and command in an episode.

use serde::{Deserialize, Serialize};

use crate::action::AtomicAction;
use crate::fsm::{Command, RobotFsmState};
use crate::human::HumanPhase;
use crate::scene::PartId;
use crate::time::SimTime;
use crate::{Real, Vec3};

/// One simulation event. `(time, seq)` is a strict total order over any
/// trace: seq numbers are assigned at insertion and same-time events execute
/// FIFO.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub time: SimTime,
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    FsmTransition {
        from: RobotFsmState,
        to: RobotFsmState,
        commands: Vec<Command>,
    },
    ActionPredicted {
        frame_index: u64,
        label: AtomicAction,
        confidence: [Real; 8],
    },
    /// Emitted when the human's ground-truth action changes.
    TrueHumanAction {
        action: AtomicAction,
        phase: HumanPhase,
    },
    ServoCommand {
        control: Vec3,
        v_min: Option<Real>,
        terminate: bool,
    },
    GraspAttempt {
        cycle: u32,
        part: PartId,
        attempt: u32,
        success: bool,
        alignment_error: Real,
    },
    Release {
        cycle: u32,
        part: PartId,
        trigger: ReleaseTrigger,
    },
    HumanRetry {
        cycle: u32,
        attempt: u32,
    },
    EpisodeEnd {
        outcome: EpisodeOutcome,
    },
}

/// What caused a release, recorded in the Release payload so traces are
/// self-certifying.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReleaseTrigger {
    /// Consecutive grasp predictions observed while idling at the delivery point.
    Vision { consecutive: u32 },
    /// Idealized voice command issued at hand closure, released after a delay.
    Voice { command_time: SimTime },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EpisodeOutcome {
    FullSuccess,
    Failed { reason: FailureReason, at_cycle: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// The servo/grasp pipeline exhausted its attempts for a cycle.
    GraspFailure,
    /// The handover trigger never fired and the human gave up.
    HandoverFailure,
    /// The episode hit its wall-clock limit.
    Timeout,
}

impl SimEvent {
    /// Sort key implementing the trace's total order.
    pub fn order_key(&self) -> (SimTime, u64) {
        (self.time, self.seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vector3;

    #[test]
    fn events_serialize_with_stable_tags() {
        let ev = SimEvent {
            time: SimTime::from_micros(1_500_000),
            seq: 7,
            kind: EventKind::Release {
                cycle: 1,
                part: 2,
                trigger: ReleaseTrigger::Vision { consecutive: 2 },
            },
        };
        let line = serde_json::to_string(&ev).unwrap();
        assert!(line.contains("\"kind\":\"release\""));
        assert!(line.contains("\"type\":\"vision\""));
        let back: SimEvent = serde_json::from_str(&line).unwrap();
        assert_eq!(back, ev);
    }

    #[test]
    fn servo_command_round_trips() {
        let ev = SimEvent {
            time: SimTime::ZERO,
            seq: 0,
            kind: EventKind::ServoCommand {
                control: Vector3::new(0.1, -0.2, 0.0),
                v_min: Some(0.04),
                terminate: false,
            },
        };
        let line = serde_json::to_string(&ev).unwrap();
        let back: SimEvent = serde_json::from_str(&line).unwrap();
        assert_eq!(back, ev);
    }
}
