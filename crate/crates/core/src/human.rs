//! Stochastic model of the human assembler.
//!
//! The human runs a scripted per-leg cycle: wait for the robot to present a
//! part, reach, hold a grasp until the part is released (or give up after a
//! timeout, optionally retrying once), then align and spin the leg in,
//! optionally rotate the tabletop, and flip the table after the last leg.
//! Durations are log-normal draws; a deterministic mode returns medians and
//! a scripted-trace input replays a fixed human for regression tests.
//!
//! Per-cycle duration draws are consumed as a fixed-size block from a
//! dedicated sub-stream so that paired experiment modes see identical human
//! behaviour (common random numbers) regardless of mode-specific events.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::action::AtomicAction;
use crate::error::{Error, Result};
use crate::fsm::RobotFsmState;
use crate::rng::SimRng;
use crate::time::SimTime;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanMode {
    /// Release is triggered by the perception channel.
    Vision,
    /// Idealized command baseline: zero failure, release after a voice delay.
    VoiceCommand,
}

/// Log-normal duration: `median_s` is the median in seconds, `sigma` the
/// dispersion of the underlying normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormalSpec {
    pub median_s: Real,
    pub sigma: Real,
}

impl LogNormalSpec {
    pub fn new(median_s: Real, sigma: Real) -> Self {
        LogNormalSpec { median_s, sigma }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.median_s > 0.0) || !self.median_s.is_finite() {
            return Err(Error::config(format!(
                "duration median for {name} must be positive, got {}",
                self.median_s
            )));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(Error::config(format!(
                "duration sigma for {name} must be non-negative"
            )));
        }
        Ok(())
    }

    /// Mean of the distribution (median * exp(sigma^2 / 2)).
    pub fn mean(&self) -> Real {
        self.median_s * (self.sigma * self.sigma / 2.0).exp()
    }

    fn sample(&self, rng: &mut SimRng) -> Real {
        if self.sigma == 0.0 {
            return self.median_s;
        }
        LogNormal::new(self.median_s.ln(), self.sigma).unwrap().sample(rng)
    }
}

/// Per-action duration distributions. All defaults are plausible desk-scale
/// values, not measured ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionDurations {
    pub reach: LogNormalSpec,
    pub human_grasp: LogNormalSpec,
    pub align_leg: LogNormalSpec,
    pub spin_leg: LogNormalSpec,
    pub rotate_table: LogNormalSpec,
    pub flip_table: LogNormalSpec,
    pub flip_tabletop: LogNormalSpec,
}

impl Default for ActionDurations {
    fn default() -> Self {
        ActionDurations {
            reach: LogNormalSpec::new(1.5, 0.25),
            human_grasp: LogNormalSpec::new(1.0, 0.25),
            align_leg: LogNormalSpec::new(4.0, 0.25),
            spin_leg: LogNormalSpec::new(8.0, 0.25),
            rotate_table: LogNormalSpec::new(3.0, 0.25),
            flip_table: LogNormalSpec::new(5.0, 0.25),
            flip_tabletop: LogNormalSpec::new(5.0, 0.25),
        }
    }
}

impl ActionDurations {
    pub fn get(&self, action: AtomicAction) -> Option<LogNormalSpec> {
        match action {
            AtomicAction::Reach => Some(self.reach),
            AtomicAction::HumanGrasp => Some(self.human_grasp),
            AtomicAction::AlignLeg => Some(self.align_leg),
            AtomicAction::SpinLeg => Some(self.spin_leg),
            AtomicAction::RotateTable => Some(self.rotate_table),
            AtomicAction::FlipTable => Some(self.flip_table),
            AtomicAction::FlipTabletop => Some(self.flip_tabletop),
            AtomicAction::NoAssemblyAction => None,
        }
    }
}

/// One scripted human step: the action and how long it takes. Grasp entries
/// are consumed for sequence validation but their duration is event-driven.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub action: AtomicAction,
    pub duration_s: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumanConfig {
    pub durations: ActionDurations,
    /// When set, every sampled duration collapses to its median.
    pub deterministic_durations: bool,
    /// Probability of repeating the reach-and-grasp after a refusal.
    pub retry_probability: Real,
    /// How long a grasp is held before giving up, seconds.
    pub retry_timeout_s: Real,
    /// Total grasp attempts per cycle (first attempt plus retries).
    pub max_handover_attempts: u32,
    /// Probability of rotating the tabletop after a non-final leg.
    pub rotate_probability: Real,
    pub mode: HumanMode,
    /// Release latency after the voice command in command mode. The default
    /// median is calibrated so the vision mode is faster by about half a
    /// second at the default detection parameters.
    pub voice_delay: LogNormalSpec,
    /// Fixed (action, duration) replay, bypassing sampling.
    pub script: Option<Vec<ScriptEntry>>,
}

impl Default for HumanConfig {
    fn default() -> Self {
        HumanConfig {
            durations: ActionDurations::default(),
            deterministic_durations: false,
            retry_probability: 0.68,
            retry_timeout_s: 7.5,
            max_handover_attempts: 2,
            rotate_probability: 0.5,
            mode: HumanMode::Vision,
            voice_delay: LogNormalSpec::new(3.13, 0.25),
            script: None,
        }
    }
}

impl HumanConfig {
    pub fn validate(&self) -> Result<()> {
        for action in AtomicAction::ALL {
            if let Some(spec) = self.durations.get(action) {
                spec.validate(action.name())?;
            }
        }
        for (name, p) in [
            ("retry_probability", self.retry_probability),
            ("rotate_probability", self.rotate_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("human.{name} must lie in [0,1], got {p}")));
            }
        }
        if !(self.retry_timeout_s > 0.0) {
            return Err(Error::config("human.retry_timeout_s must be positive"));
        }
        if self.max_handover_attempts < 1 {
            return Err(Error::config("human.max_handover_attempts must be at least 1"));
        }
        self.voice_delay.validate("voice_delay")?;
        if let Some(script) = &self.script {
            for entry in script {
                if entry.action == AtomicAction::NoAssemblyAction {
                    return Err(Error::config("scripts cannot contain no_assembly_action"));
                }
                if !(entry.duration_s > 0.0) {
                    return Err(Error::config("script durations must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Draw a duration for an action; deterministic mode returns the median.
pub fn sample_duration(
    action: AtomicAction,
    cfg: &HumanConfig,
    rng: &mut SimRng,
) -> Result<Real> {
    let spec = cfg
        .durations
        .get(action)
        .ok_or_else(|| Error::config(format!("no duration distribution for {action}")))?;
    if cfg.deterministic_durations {
        Ok(spec.median_s)
    } else {
        Ok(spec.sample(rng))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssemblyStep {
    AlignLeg,
    SpinLeg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanPhase {
    WaitingForRobot,
    Reaching,
    Grasping,
    Assembling(AssemblyStep),
    Rotating,
    Flipping,
    Done,
}

impl HumanPhase {
    /// Ground-truth atomic action implied by the phase.
    pub fn action(self) -> AtomicAction {
        match self {
            HumanPhase::WaitingForRobot | HumanPhase::Done => AtomicAction::NoAssemblyAction,
            HumanPhase::Reaching => AtomicAction::Reach,
            HumanPhase::Grasping => AtomicAction::HumanGrasp,
            HumanPhase::Assembling(AssemblyStep::AlignLeg) => AtomicAction::AlignLeg,
            HumanPhase::Assembling(AssemblyStep::SpinLeg) => AtomicAction::SpinLeg,
            HumanPhase::Rotating => AtomicAction::RotateTable,
            HumanPhase::Flipping => AtomicAction::FlipTable,
        }
    }
}

/// Durations for one leg cycle, drawn as a block at cycle start so paired
/// modes consume the stream identically whatever happens mid-cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CycleDraws {
    reach_s: Real,
    align_s: Real,
    spin_s: Real,
    rotate: bool,
    rotate_s: Real,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumanState {
    pub phase: HumanPhase,
    pub current_action: AtomicAction,
    pub phase_deadline: Option<SimTime>,
    pub legs_assembled: u32,
    /// Grasp attempts made in the current cycle.
    pub attempts_this_cycle: u32,
    legs_target: u32,
    /// Handover-only episodes skip the assembly tail.
    skip_assembly: bool,
    draws: Option<CycleDraws>,
    script_pos: usize,
}

impl HumanState {
    pub fn new(legs_target: u32, skip_assembly: bool) -> Self {
        HumanState {
            phase: HumanPhase::WaitingForRobot,
            current_action: AtomicAction::NoAssemblyAction,
            phase_deadline: None,
            legs_assembled: 0,
            attempts_this_cycle: 0,
            legs_target,
            skip_assembly,
            draws: None,
            script_pos: 0,
        }
    }
}

/// Side effects of one human tick, consumed by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HumanSignal {
    /// Hand closed on the part; in command mode this is the command issue.
    HandClosure { attempt: u32 },
    /// The human decided to repeat the reach-and-grasp.
    Retry { attempt: u32 },
    /// The human gave up waiting for the release; the cycle failed.
    HandoverGivenUp,
    LegAssembled { leg: u32 },
    AssemblyComplete,
}

/// Random streams feeding the human model: cycle duration blocks and retry
/// decisions are kept apart so paired modes stay aligned.
#[derive(Debug, Clone)]
pub struct HumanRngs {
    pub durations: SimRng,
    pub retry: SimRng,
}

impl HumanRngs {
    pub fn from_base(base: &SimRng) -> Self {
        HumanRngs {
            durations: base.substream("human/durations"),
            retry: base.substream("human/retry"),
        }
    }
}

fn next_script_duration(
    cfg: &HumanConfig,
    state: &mut HumanState,
    expected: AtomicAction,
) -> Result<Real> {
    let script = cfg.script.as_ref().unwrap();
    let entry = script.get(state.script_pos).ok_or_else(|| {
        Error::config(format!("script exhausted; expected a {expected} entry"))
    })?;
    if entry.action != expected {
        return Err(Error::config(format!(
            "script entry {} is {}, expected {expected}",
            state.script_pos, entry.action
        )));
    }
    state.script_pos += 1;
    Ok(entry.duration_s)
}

/// Peek whether the script rotates the tabletop after the current leg.
fn script_rotates(cfg: &HumanConfig, state: &HumanState) -> bool {
    cfg.script
        .as_ref()
        .and_then(|s| s.get(state.script_pos))
        .map(|e| e.action == AtomicAction::RotateTable)
        .unwrap_or(false)
}

fn draw_cycle(cfg: &HumanConfig, state: &mut HumanState, rngs: &mut HumanRngs) -> Result<CycleDraws> {
    if cfg.script.is_some() {
        let reach_s = next_script_duration(cfg, state, AtomicAction::Reach)?;
        let _grasp = next_script_duration(cfg, state, AtomicAction::HumanGrasp)?;
        let (align_s, spin_s, rotate, rotate_s) = if state.skip_assembly {
            (1.0, 1.0, false, 1.0)
        } else {
            let align_s = next_script_duration(cfg, state, AtomicAction::AlignLeg)?;
            let spin_s = next_script_duration(cfg, state, AtomicAction::SpinLeg)?;
            let last_leg = state.legs_assembled + 1 == state.legs_target;
            let rotate = !last_leg && script_rotates(cfg, state);
            let rotate_s = if rotate {
                next_script_duration(cfg, state, AtomicAction::RotateTable)?
            } else {
                1.0
            };
            (align_s, spin_s, rotate, rotate_s)
        };
        return Ok(CycleDraws {
            reach_s,
            align_s,
            spin_s,
            rotate,
            rotate_s,
        });
    }
    let rng = &mut rngs.durations;
    let reach_s = sample_duration(AtomicAction::Reach, cfg, rng)?;
    let align_s = sample_duration(AtomicAction::AlignLeg, cfg, rng)?;
    let spin_s = sample_duration(AtomicAction::SpinLeg, cfg, rng)?;
    let rotate_draw: Real = rng.random_range(0.0..1.0);
    let rotate_s = sample_duration(AtomicAction::RotateTable, cfg, rng)?;
    Ok(CycleDraws {
        reach_s,
        align_s,
        spin_s,
        rotate: rotate_draw < cfg.rotate_probability,
        rotate_s,
    })
}

fn deadline_after(now: SimTime, seconds: Real) -> Result<SimTime> {
    Ok(now + SimTime::from_secs(seconds)?)
}

/// Advance the human by one recognition tick.
///
/// `release_arrived` is true when the robot released the part since the
/// previous tick (or earlier in this cycle). Returns the successor state,
/// the ground-truth action for this tick, and any signals for the engine.
pub fn human_tick(
    state: &HumanState,
    robot_state: RobotFsmState,
    release_arrived: bool,
    cfg: &HumanConfig,
    rngs: &mut HumanRngs,
    now: SimTime,
) -> Result<(HumanState, AtomicAction, Vec<HumanSignal>)> {
    let mut next = state.clone();
    let mut signals = Vec::new();

    match state.phase {
        HumanPhase::WaitingForRobot => {
            if robot_state == RobotFsmState::Idle || release_arrived {
                let draws = draw_cycle(cfg, &mut next, rngs)?;
                next.draws = Some(draws);
                next.attempts_this_cycle = 0;
                next.phase = HumanPhase::Reaching;
                next.phase_deadline = Some(deadline_after(now, draws.reach_s)?);
            }
        }
        HumanPhase::Reaching => {
            if now >= state.phase_deadline.unwrap() {
                next.phase = HumanPhase::Grasping;
                next.attempts_this_cycle += 1;
                signals.push(HumanSignal::HandClosure {
                    attempt: next.attempts_this_cycle,
                });
                // command mode never times out: the release always comes
                next.phase_deadline = if cfg.mode == HumanMode::VoiceCommand {
                    None
                } else {
                    Some(deadline_after(now, cfg.retry_timeout_s)?)
                };
            }
        }
        HumanPhase::Grasping => {
            if release_arrived {
                advance_past_grasp(&mut next, now, &mut signals)?;
            } else if let Some(deadline) = state.phase_deadline {
                if now >= deadline {
                    let retry = next.attempts_this_cycle < cfg.max_handover_attempts
                        && rngs.retry.random_range(0.0..1.0) < cfg.retry_probability;
                    if retry {
                        signals.push(HumanSignal::Retry {
                            attempt: next.attempts_this_cycle + 1,
                        });
                        let reach_s = next.draws.unwrap().reach_s;
                        next.phase = HumanPhase::Reaching;
                        next.phase_deadline = Some(deadline_after(now, reach_s)?);
                    } else {
                        signals.push(HumanSignal::HandoverGivenUp);
                        next.phase = HumanPhase::WaitingForRobot;
                        next.phase_deadline = None;
                    }
                }
            }
        }
        HumanPhase::Assembling(AssemblyStep::AlignLeg) => {
            if now >= state.phase_deadline.unwrap() {
                let draws = next.draws.unwrap();
                next.phase = HumanPhase::Assembling(AssemblyStep::SpinLeg);
                next.phase_deadline = Some(deadline_after(now, draws.spin_s)?);
            }
        }
        HumanPhase::Assembling(AssemblyStep::SpinLeg) => {
            if now >= state.phase_deadline.unwrap() {
                next.legs_assembled += 1;
                signals.push(HumanSignal::LegAssembled {
                    leg: next.legs_assembled,
                });
                finish_leg(&mut next, cfg, rngs, now)?;
            }
        }
        HumanPhase::Rotating => {
            if now >= state.phase_deadline.unwrap() {
                next.phase = HumanPhase::WaitingForRobot;
                next.phase_deadline = None;
            }
        }
        HumanPhase::Flipping => {
            if now >= state.phase_deadline.unwrap() {
                next.phase = HumanPhase::Done;
                next.phase_deadline = None;
                signals.push(HumanSignal::AssemblyComplete);
            }
        }
        HumanPhase::Done => {}
    }

    next.current_action = next.phase.action();
    let action = next.current_action;
    Ok((next, action, signals))
}

/// Transition out of a resolved grasp: into assembly, or straight to done in
/// handover-only episodes.
fn advance_past_grasp(
    next: &mut HumanState,
    now: SimTime,
    signals: &mut Vec<HumanSignal>,
) -> Result<()> {
    if next.skip_assembly {
        next.legs_assembled += 1;
        next.phase = HumanPhase::Done;
        next.phase_deadline = None;
        signals.push(HumanSignal::LegAssembled {
            leg: next.legs_assembled,
        });
        signals.push(HumanSignal::AssemblyComplete);
        return Ok(());
    }
    let draws = next.draws.unwrap();
    next.phase = HumanPhase::Assembling(AssemblyStep::AlignLeg);
    next.phase_deadline = Some(deadline_after(now, draws.align_s)?);
    Ok(())
}

fn finish_leg(
    next: &mut HumanState,
    cfg: &HumanConfig,
    rngs: &mut HumanRngs,
    now: SimTime,
) -> Result<()> {
    if next.legs_assembled >= next.legs_target {
        let flip_s = if cfg.script.is_some() {
            next_script_duration(cfg, next, AtomicAction::FlipTable)?
        } else {
            sample_duration(AtomicAction::FlipTable, cfg, &mut rngs.durations)?
        };
        next.phase = HumanPhase::Flipping;
        next.phase_deadline = Some(deadline_after(now, flip_s)?);
        return Ok(());
    }
    let draws = next.draws.unwrap();
    if draws.rotate {
        next.phase = HumanPhase::Rotating;
        next.phase_deadline = Some(deadline_after(now, draws.rotate_s)?);
    } else {
        next.phase = HumanPhase::WaitingForRobot;
        next.phase_deadline = None;
    }
    Ok(())
}
