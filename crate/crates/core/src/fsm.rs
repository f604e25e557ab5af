//! Robot task logic: state transitions driven by servo signals, controller
//! completion and the visual-handover trigger.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::action::AtomicAction;
use crate::error::{Error, Result};

/// The robot's task state. Exactly one state holds at any instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotFsmState {
    Home,
    ReachAndGrasp,
    Pass,
    Idle,
    Handover,
    Finished,
}

impl RobotFsmState {
    pub fn name(self) -> &'static str {
        match self {
            RobotFsmState::Home => "home",
            RobotFsmState::ReachAndGrasp => "reach_and_grasp",
            RobotFsmState::Pass => "pass",
            RobotFsmState::Idle => "idle",
            RobotFsmState::Handover => "handover",
            RobotFsmState::Finished => "finished",
        }
    }
}

impl fmt::Display for RobotFsmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Command emitted by a transition; an empty command list means "none".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    MoveServo,
    ExecuteGrasp,
    MoveToDelivery,
    OpenGripper,
}

/// Inputs sampled by the driver for one FSM step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FsmInputs {
    pub servo_terminate: bool,
    pub servo_assembly_done: bool,
    /// Result of a grasp attempt; only present while in `ReachAndGrasp`.
    pub grasp_succeeded: Option<bool>,
    pub at_delivery_point: bool,
    pub release_trigger: bool,
    pub legs_remaining: u8,
}

/// One transition of the task logic.
///
/// Pure function: the same `(state, inputs)` always maps to the same
/// successor and commands. Combinations that no correct driver can produce
/// return a contract-violation error instead of being silently ignored.
pub fn fsm_step(state: RobotFsmState, inputs: &FsmInputs) -> Result<(RobotFsmState, Vec<Command>)> {
    if inputs.grasp_succeeded.is_some() && state != RobotFsmState::ReachAndGrasp {
        return Err(Error::contract(format!(
            "grasp result supplied in state {state}"
        )));
    }
    if inputs.servo_assembly_done && inputs.legs_remaining > 0 {
        return Err(Error::contract(
            "assembly reported done while legs remain to be delivered",
        ));
    }

    let next = match state {
        RobotFsmState::Home => {
            if inputs.servo_assembly_done {
                (RobotFsmState::Finished, vec![])
            } else {
                (RobotFsmState::ReachAndGrasp, vec![Command::MoveServo])
            }
        }
        RobotFsmState::ReachAndGrasp => match inputs.grasp_succeeded {
            Some(true) => (RobotFsmState::Pass, vec![Command::MoveToDelivery]),
            Some(false) => (RobotFsmState::ReachAndGrasp, vec![Command::MoveServo]),
            None if inputs.servo_terminate => {
                (RobotFsmState::ReachAndGrasp, vec![Command::ExecuteGrasp])
            }
            None => (RobotFsmState::ReachAndGrasp, vec![Command::MoveServo]),
        },
        RobotFsmState::Pass => {
            if inputs.at_delivery_point {
                (RobotFsmState::Idle, vec![])
            } else {
                (RobotFsmState::Pass, vec![])
            }
        }
        RobotFsmState::Idle => {
            if inputs.release_trigger {
                (RobotFsmState::Handover, vec![Command::OpenGripper])
            } else {
                (RobotFsmState::Idle, vec![])
            }
        }
        RobotFsmState::Handover => (RobotFsmState::Home, vec![]),
        RobotFsmState::Finished => (RobotFsmState::Finished, vec![]),
    };
    Ok(next)
}

/// Consecutive-grasp release trigger.
///
/// The count rises only on an uninterrupted run of `HumanGrasp` predictions;
/// anything else (including the absence of a prediction while the recognizer
/// buffers) resets it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandoverTrigger {
    pub consecutive_grasp_count: u32,
    pub required: u32,
}

impl HandoverTrigger {
    pub fn new(required: u32) -> Self {
        HandoverTrigger {
            consecutive_grasp_count: 0,
            required,
        }
    }

    pub fn reset(&mut self) {
        self.consecutive_grasp_count = 0;
    }
}

/// Advance the trigger with this tick's prediction. Returns the updated
/// trigger and whether release fires; the count resets after a release.
pub fn handover_trigger_update(
    trigger: HandoverTrigger,
    prediction: Option<AtomicAction>,
) -> (HandoverTrigger, bool) {
    let mut next = trigger;
    if prediction == Some(AtomicAction::HumanGrasp) {
        next.consecutive_grasp_count = (next.consecutive_grasp_count + 1).min(next.required);
    } else {
        next.consecutive_grasp_count = 0;
    }
    let release = next.consecutive_grasp_count >= next.required;
    if release {
        next.consecutive_grasp_count = 0;
    }
    (next, release)
}

/// One row of the machine-readable transition table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionRule {
    pub from: RobotFsmState,
    pub guard: String,
    pub to: RobotFsmState,
    pub commands: Vec<Command>,
    /// Representative inputs satisfying the guard, used by the documentation
    /// test to check the table against `fsm_step`.
    pub witness: FsmInputs,
}

/// The full transition table as data, exported for documentation and tooling.
pub fn transition_table() -> Vec<TransitionRule> {
    use Command::*;
    use RobotFsmState::*;
    let base = FsmInputs {
        legs_remaining: 4,
        ..FsmInputs::default()
    };
    vec![
        TransitionRule {
            from: Home,
            guard: "servo_assembly_done".into(),
            to: Finished,
            commands: vec![],
            witness: FsmInputs {
                servo_assembly_done: true,
                legs_remaining: 0,
                ..FsmInputs::default()
            },
        },
        TransitionRule {
            from: Home,
            guard: "!servo_assembly_done".into(),
            to: ReachAndGrasp,
            commands: vec![MoveServo],
            witness: base,
        },
        TransitionRule {
            from: ReachAndGrasp,
            guard: "grasp_succeeded == true".into(),
            to: Pass,
            commands: vec![MoveToDelivery],
            witness: FsmInputs {
                grasp_succeeded: Some(true),
                ..base
            },
        },
        TransitionRule {
            from: ReachAndGrasp,
            guard: "grasp_succeeded == false".into(),
            to: ReachAndGrasp,
            commands: vec![MoveServo],
            witness: FsmInputs {
                grasp_succeeded: Some(false),
                ..base
            },
        },
        TransitionRule {
            from: ReachAndGrasp,
            guard: "servo_terminate".into(),
            to: ReachAndGrasp,
            commands: vec![ExecuteGrasp],
            witness: FsmInputs {
                servo_terminate: true,
                ..base
            },
        },
        TransitionRule {
            from: ReachAndGrasp,
            guard: "!servo_terminate".into(),
            to: ReachAndGrasp,
            commands: vec![MoveServo],
            witness: base,
        },
        TransitionRule {
            from: Pass,
            guard: "at_delivery_point".into(),
            to: Idle,
            commands: vec![],
            witness: FsmInputs {
                at_delivery_point: true,
                ..base
            },
        },
        TransitionRule {
            from: Pass,
            guard: "!at_delivery_point".into(),
            to: Pass,
            commands: vec![],
            witness: base,
        },
        TransitionRule {
            from: Idle,
            guard: "release_trigger".into(),
            to: Handover,
            commands: vec![OpenGripper],
            witness: FsmInputs {
                release_trigger: true,
                at_delivery_point: true,
                ..base
            },
        },
        TransitionRule {
            from: Idle,
            guard: "!release_trigger".into(),
            to: Idle,
            commands: vec![],
            witness: FsmInputs {
                at_delivery_point: true,
                ..base
            },
        },
        TransitionRule {
            from: Handover,
            guard: "always".into(),
            to: Home,
            commands: vec![],
            witness: FsmInputs {
                at_delivery_point: true,
                ..base
            },
        },
        TransitionRule {
            from: Finished,
            guard: "always".into(),
            to: Finished,
            commands: vec![],
            witness: FsmInputs {
                servo_assembly_done: true,
                legs_remaining: 0,
                ..FsmInputs::default()
            },
        },
    ]
}
