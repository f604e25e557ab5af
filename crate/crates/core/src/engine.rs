//! The deterministic discrete-event loop wiring perception, task logic,
//! servoing and the human model together, plus episode/batch runners.
//!
//! Scheduling: activities live in a priority queue keyed `(time, insertion
//! counter)`, so simultaneous activities execute in insertion order and the
//! whole episode is a pure function of `(config, seed)`. Recognition and
//! human ticks share one cadence; servo ticks run on their own; voice
//! releases and the episode timeout are one-shot entries.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::path::PathBuf;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::action::AtomicAction;
use crate::error::{Error, Result};
use crate::event::{EpisodeOutcome, EventKind, FailureReason, ReleaseTrigger, SimEvent};
use crate::fsm::{
    fsm_step, handover_trigger_update, Command, FsmInputs, HandoverTrigger, RobotFsmState,
};
use crate::geom::Vector3;
use crate::human::{
    human_tick, HumanConfig, HumanMode, HumanRngs, HumanSignal, HumanState,
};
use crate::percept::{ActionPrediction, Recognizer, RecognizerConfig};
use crate::rng::{seeded_rng, SimRng};
use crate::scene::{Gripper, Part, Scene};
use crate::servo::{execute_grasp, servo_tick, LyapunovGrid, ServoConfig};
use crate::time::SimTime;
use crate::trace::{EpisodeTrace, TraceMeta};
use crate::{Aabb, Real, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Four-leg assembly: the robot fetches parts from storage.
    FullAssembly,
    /// Single handover repetition: the robot starts idle at the delivery
    /// point already holding the part.
    HandoverOnly,
}

/// Workspace geometry. None of these dimensions are measured values; they
/// are desk-scale defaults and live in config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkspaceConfig {
    pub bounds: Aabb,
    /// Region where storage parts are spawned.
    pub storage: Aabb,
    pub delivery_point: Vec3,
    pub initial_ee: Vec3,
    /// Arrival tolerance at the delivery point, m.
    pub delivery_tolerance: Real,
    pub part_radius: Real,
    /// Minimal centre distance between spawned parts, m.
    pub min_part_separation: Real,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        WorkspaceConfig {
            bounds: Aabb::new(Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 1.0, 0.5)),
            storage: Aabb::new(Vector3::new(0.55, 0.10, 0.0), Vector3::new(0.95, 0.90, 0.0)),
            delivery_point: Vector3::new(0.08, 0.50, 0.20),
            initial_ee: Vector3::new(0.50, 0.50, 0.25),
            delivery_tolerance: 0.01,
            part_radius: 0.03,
            min_part_separation: 0.12,
        }
    }
}

impl WorkspaceConfig {
    fn validate(&self) -> Result<()> {
        if !self.bounds.is_valid() || !self.storage.is_valid() {
            return Err(Error::config("workspace boxes are inverted"));
        }
        for (name, p) in [
            ("storage.min", self.storage.min),
            ("storage.max", self.storage.max),
            ("delivery_point", self.delivery_point),
            ("initial_ee", self.initial_ee),
        ] {
            if !self.bounds.contains(p) {
                return Err(Error::config(format!(
                    "workspace.{name} lies outside the workspace bounds"
                )));
            }
        }
        if !(self.delivery_tolerance > 0.0) {
            return Err(Error::config("delivery_tolerance must be positive"));
        }
        if !(self.part_radius > 0.0) {
            return Err(Error::config("part_radius must be positive"));
        }
        if self.min_part_separation < 2.0 * self.part_radius {
            return Err(Error::config(
                "min_part_separation must be at least one part diameter",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FsmParams {
    /// Consecutive grasp predictions required to release.
    pub required_consecutive: u32,
    /// Grasp attempts per cycle before the cycle counts as failed. The
    /// default of 1 mirrors the study protocol, where a failed grasp resets
    /// the cycle; raise it to study bounded re-servoing.
    pub max_grasp_attempts: u32,
}

impl Default for FsmParams {
    fn default() -> Self {
        FsmParams {
            required_consecutive: 2,
            max_grasp_attempts: 1,
        }
    }
}

/// Fixed inter-module message latencies (seconds), quantized to ticks of the
/// receiving loop. Zero means same-tick delivery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyConfig {
    /// Recognition output -> task logic.
    pub prediction_s: Real,
    /// Servo output -> arm motion.
    pub control_s: Real,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        LatencyConfig {
            prediction_s: 0.0,
            control_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleFailurePolicy {
    /// A failed cycle ends the episode (the study's reset semantics).
    AbortEpisode,
    /// A failed cycle discards its part and the episode continues.
    ContinueNextCycle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub seed: u64,
    pub scenario: Scenario,
    /// Parts to deliver in a full assembly.
    pub legs: u32,
    pub episode_timeout_s: Real,
    pub servo: ServoConfig,
    pub recognizer: RecognizerConfig,
    pub human: HumanConfig,
    pub fsm: FsmParams,
    pub workspace: WorkspaceConfig,
    pub latency: LatencyConfig,
    pub on_cycle_failure: CycleFailurePolicy,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            seed: 0,
            scenario: Scenario::FullAssembly,
            legs: 4,
            episode_timeout_s: 600.0,
            servo: ServoConfig::default(),
            recognizer: RecognizerConfig::default(),
            human: HumanConfig::default(),
            fsm: FsmParams::default(),
            workspace: WorkspaceConfig::default(),
            latency: LatencyConfig::default(),
            on_cycle_failure: CycleFailurePolicy::AbortEpisode,
        }
    }
}

impl EpisodeConfig {
    /// Fault-free configuration: perfect recognizer, noise-free servo,
    /// deterministic human. Every episode succeeds identically.
    pub fn oracle() -> Self {
        EpisodeConfig {
            servo: ServoConfig::oracle(),
            recognizer: RecognizerConfig::oracle(),
            human: HumanConfig {
                deterministic_durations: true,
                rotate_probability: 1.0,
                ..HumanConfig::default()
            },
            ..EpisodeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.legs < 1 {
            return Err(Error::config("legs must be at least 1"));
        }
        if !(self.episode_timeout_s > 0.0) {
            return Err(Error::config("episode_timeout_s must be positive"));
        }
        if self.fsm.required_consecutive < 1 {
            return Err(Error::config("fsm.required_consecutive must be at least 1"));
        }
        if self.fsm.max_grasp_attempts < 1 {
            return Err(Error::config("fsm.max_grasp_attempts must be at least 1"));
        }
        if self.latency.prediction_s < 0.0 || self.latency.control_s < 0.0 {
            return Err(Error::config("latencies must be non-negative"));
        }
        self.servo.validate()?;
        self.recognizer.build().map(|_| ())?;
        self.human.validate()?;
        self.workspace.validate()?;
        SimTime::period_of_rate(self.recognizer.frame_rate)?;
        Ok(())
    }
}

/// Build the initial scene for a config, sampling storage part positions
/// from the episode's `scene` sub-stream.
pub fn initial_scene(cfg: &EpisodeConfig, rng: &mut SimRng) -> Result<Scene> {
    let ws = &cfg.workspace;
    let mut scene = Scene {
        parts: Vec::new(),
        ee_pose: ws.initial_ee,
        gripper: Gripper::Open,
        workspace_bounds: ws.bounds,
        part_radius: ws.part_radius,
    };
    match cfg.scenario {
        Scenario::HandoverOnly => {
            scene.ee_pose = ws.delivery_point;
            scene.parts.push(Part {
                id: 0,
                position: ws.delivery_point,
                orientation: 0.0,
                attached: true,
            });
            scene.gripper = Gripper::Holding(0);
        }
        Scenario::FullAssembly => {
            let margin = ws.part_radius;
            for id in 0..cfg.legs {
                let mut placed = false;
                for _ in 0..1000 {
                    let x = rng.random_range(ws.storage.min.x + margin..ws.storage.max.x - margin);
                    let y = rng.random_range(ws.storage.min.y + margin..ws.storage.max.y - margin);
                    let pos = Vector3::new(x, y, ws.storage.min.z);
                    let clear = scene.parts.iter().all(|p| {
                        p.position.planar_distance(pos) >= ws.min_part_separation
                    });
                    if clear {
                        scene.parts.push(Part {
                            id,
                            position: pos,
                            orientation: rng.random_range(0.0..std::f64::consts::TAU),
                            attached: false,
                        });
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    return Err(Error::config(
                        "could not place parts with the configured separation; \
                         enlarge the storage region or reduce min_part_separation",
                    ));
                }
            }
        }
    }
    scene.validate()?;
    Ok(scene)
}

/// Observer hooks for optional per-tick artifacts (grid dumps).
pub trait EpisodeObserver {
    fn on_grid(&mut self, _time: SimTime, _grid: &LyapunovGrid) {}
}

/// No-op observer.
pub struct NullObserver;
impl EpisodeObserver for NullObserver {}

struct Runner<'a, O: EpisodeObserver> {
    cfg: &'a EpisodeConfig,
    observer: &'a mut O,
    scene: Scene,
    robot: RobotFsmState,
    human: HumanState,
    human_rngs: HumanRngs,
    percept_rng: SimRng,
    servo_rng: SimRng,
    voice_rng: SimRng,
    recognizer: Recognizer,
    trigger: HandoverTrigger,
    events: Vec<SimEvent>,
    queue: BinaryHeap<Reverse<(SimTime, u64, u8)>>,
    queue_counter: u64,
    frame: u64,
    recog_period: SimTime,
    servo_period: SimTime,
    /// 1-based index of the robot's current cycle.
    cycle: u32,
    grasp_attempts_this_cycle: u32,
    legs_delivered: u32,
    last_logged_action: Option<AtomicAction>,
    voice_release_scheduled: bool,
    prediction_delay_ticks: usize,
    control_delay_ticks: usize,
    prediction_queue: VecDeque<Option<AtomicAction>>,
    control_queue: VecDeque<Vec3>,
    first_failure: Option<(FailureReason, u32)>,
    outcome: Option<EpisodeOutcome>,
    human_done: bool,
    /// Issue time of the pending voice command, if one is scheduled.
    voice_command_time: Option<SimTime>,
}

const ACT_RECOGNITION: u8 = 0;
const ACT_SERVO: u8 = 1;
const ACT_VOICE: u8 = 2;
const ACT_TIMEOUT: u8 = 3;

impl<'a, O: EpisodeObserver> Runner<'a, O> {
    fn new(cfg: &'a EpisodeConfig, observer: &'a mut O) -> Result<Self> {
        cfg.validate()?;
        let base = seeded_rng(cfg.seed);
        let mut scene_rng = base.substream("scene");
        let scene = initial_scene(cfg, &mut scene_rng)?;
        let recognizer = Recognizer::new(cfg.recognizer.build()?);
        let recog_period = SimTime::period_of_rate(cfg.recognizer.frame_rate)?;
        let servo_period = SimTime::period_of_rate(cfg.servo.tick_rate)?;
        let robot = match cfg.scenario {
            Scenario::FullAssembly => RobotFsmState::Home,
            Scenario::HandoverOnly => RobotFsmState::Idle,
        };
        let human = HumanState::new(cfg.legs, cfg.scenario == Scenario::HandoverOnly);
        let prediction_delay_ticks =
            (cfg.latency.prediction_s * cfg.recognizer.frame_rate).round() as usize;
        let control_delay_ticks = (cfg.latency.control_s * cfg.servo.tick_rate).round() as usize;

        let mut runner = Runner {
            cfg,
            observer,
            scene,
            robot,
            human,
            human_rngs: HumanRngs::from_base(&base),
            percept_rng: base.substream("percept"),
            servo_rng: base.substream("servo"),
            voice_rng: base.substream("voice"),
            recognizer,
            trigger: HandoverTrigger::new(cfg.fsm.required_consecutive),
            events: Vec::new(),
            queue: BinaryHeap::new(),
            queue_counter: 0,
            frame: 0,
            recog_period,
            servo_period,
            cycle: 1,
            grasp_attempts_this_cycle: 0,
            legs_delivered: 0,
            last_logged_action: None,
            voice_release_scheduled: false,
            prediction_delay_ticks,
            control_delay_ticks,
            prediction_queue: VecDeque::new(),
            control_queue: VecDeque::new(),
            first_failure: None,
            outcome: None,
            human_done: false,
            voice_command_time: None,
        };
        if cfg.scenario == Scenario::HandoverOnly {
            // the robot was set up at the delivery point before the episode
            runner.emit(
                SimTime::ZERO,
                EventKind::FsmTransition {
                    from: RobotFsmState::Home,
                    to: RobotFsmState::Idle,
                    commands: vec![],
                },
            );
        }
        runner.schedule(SimTime::ZERO, ACT_RECOGNITION);
        runner.schedule(SimTime::ZERO, ACT_SERVO);
        runner.schedule(SimTime::from_secs(cfg.episode_timeout_s)?, ACT_TIMEOUT);
        Ok(runner)
    }

    fn schedule(&mut self, time: SimTime, activity: u8) {
        self.queue_counter += 1;
        self.queue.push(Reverse((time, self.queue_counter, activity)));
    }

    fn emit(&mut self, time: SimTime, kind: EventKind) {
        let seq = self.events.len() as u64;
        self.events.push(SimEvent { time, seq, kind });
    }

    fn legs_remaining(&self) -> u8 {
        let held = matches!(self.scene.gripper, Gripper::Holding(_)) as usize;
        (self.scene.unattached_count() + held).min(u8::MAX as usize) as u8
    }

    fn fail(&mut self, reason: FailureReason, at_cycle: u32) {
        if self.first_failure.is_none() {
            self.first_failure = Some((reason, at_cycle));
        }
        if self.cfg.on_cycle_failure == CycleFailurePolicy::AbortEpisode
            || reason == FailureReason::Timeout
        {
            let (reason, at_cycle) = self.first_failure.unwrap();
            self.outcome = Some(EpisodeOutcome::Failed { reason, at_cycle });
        }
    }

    /// Transition bookkeeping shared by every fsm_step call site.
    fn apply_fsm(&mut self, time: SimTime, inputs: &FsmInputs) -> Result<Vec<Command>> {
        let (next, commands) = fsm_step(self.robot, inputs)?;
        if next != self.robot {
            self.emit(
                time,
                EventKind::FsmTransition {
                    from: self.robot,
                    to: next,
                    commands: commands.clone(),
                },
            );
            if next == RobotFsmState::Idle {
                self.trigger.reset();
            }
            if self.robot == RobotFsmState::Home && next == RobotFsmState::ReachAndGrasp {
                self.cycle = self.legs_delivered + 1 + self.lost_parts();
                self.grasp_attempts_this_cycle = 0;
            }
            self.robot = next;
        }
        Ok(commands)
    }

    fn lost_parts(&self) -> u32 {
        // parts marked attached without having been delivered or held
        let held = matches!(self.scene.gripper, Gripper::Holding(_)) as u32;
        let attached = self.scene.parts.iter().filter(|p| p.attached).count() as u32;
        attached.saturating_sub(self.legs_delivered + held)
    }

    fn release(&mut self, time: SimTime, trigger: ReleaseTrigger) -> Result<()> {
        let part = match self.scene.gripper {
            Gripper::Holding(id) => id,
            Gripper::Open => {
                return Err(Error::contract("release fired while the gripper is open"))
            }
        };
        let inputs = FsmInputs {
            release_trigger: true,
            at_delivery_point: true,
            legs_remaining: self.legs_remaining(),
            ..FsmInputs::default()
        };
        self.apply_fsm(time, &inputs)?; // Idle -> Handover, OpenGripper
        self.emit(
            time,
            EventKind::Release {
                cycle: self.cycle,
                part,
                trigger,
            },
        );
        self.scene.gripper = Gripper::Open;
        if let Some(p) = self.scene.part_mut(part) {
            p.position = self.cfg.workspace.delivery_point;
        }
        self.legs_delivered += 1;
        self.voice_release_scheduled = false;
        Ok(())
    }

    fn recognition_tick(&mut self, now: SimTime) -> Result<()> {
        self.frame += 1;

        // 1. human advances
        let release_arrived = self.legs_delivered > self.human.legs_assembled;
        let (next_human, action, signals) = human_tick(
            &self.human,
            self.robot,
            release_arrived,
            &self.cfg.human,
            &mut self.human_rngs,
            now,
        )?;
        self.human = next_human;
        if self.last_logged_action != Some(action) {
            self.emit(
                now,
                EventKind::TrueHumanAction {
                    action,
                    phase: self.human.phase,
                },
            );
            self.last_logged_action = Some(action);
        }
        for signal in signals {
            match signal {
                HumanSignal::HandClosure { .. } => {
                    if self.cfg.human.mode == HumanMode::VoiceCommand
                        && self.robot == RobotFsmState::Idle
                        && !self.voice_release_scheduled
                        && self.legs_delivered == self.human.legs_assembled
                    {
                        let spec = self.cfg.human.voice_delay;
                        let delay = if self.cfg.human.deterministic_durations || spec.sigma == 0.0
                        {
                            spec.median_s
                        } else {
                            LogNormal::new(spec.median_s.ln(), spec.sigma)
                                .unwrap()
                                .sample(&mut self.voice_rng)
                        };
                        self.schedule(now + SimTime::from_secs(delay)?, ACT_VOICE);
                        self.voice_release_scheduled = true;
                        self.voice_command_time = Some(now);
                    }
                }
                HumanSignal::Retry { attempt } => {
                    self.emit(
                        now,
                        EventKind::HumanRetry {
                            cycle: self.human.legs_assembled + 1,
                            attempt,
                        },
                    );
                }
                HumanSignal::HandoverGivenUp => {
                    self.fail(FailureReason::HandoverFailure, self.human.legs_assembled + 1);
                }
                HumanSignal::LegAssembled { .. } => {}
                HumanSignal::AssemblyComplete => {
                    self.human_done = true;
                }
            }
        }
        if self.outcome.is_some() {
            return Ok(());
        }

        // 2. recognition channel
        let prediction: Option<ActionPrediction> =
            self.recognizer.tick(self.frame, action, &mut self.percept_rng)?;
        if let Some(p) = &prediction {
            self.emit(
                now,
                EventKind::ActionPredicted {
                    frame_index: p.frame_index,
                    label: p.label,
                    confidence: p.confidence,
                },
            );
        }

        // 3. handover trigger consumes the (possibly delayed) prediction
        let label = prediction.map(|p| p.label);
        self.prediction_queue.push_back(label);
        let effective = if self.prediction_queue.len() > self.prediction_delay_ticks {
            self.prediction_queue
                .remove(self.prediction_queue.len() - 1 - self.prediction_delay_ticks)
                .unwrap_or(None)
        } else {
            None
        };
        if self.cfg.human.mode == HumanMode::Vision && self.robot == RobotFsmState::Idle {
            let (next, release) = handover_trigger_update(self.trigger, effective);
            self.trigger = next;
            if release {
                self.release(
                    now,
                    ReleaseTrigger::Vision {
                        consecutive: self.cfg.fsm.required_consecutive,
                    },
                )?;
            }
        }

        self.schedule(now + self.recog_period, ACT_RECOGNITION);
        Ok(())
    }

    fn servo_tick_activity(&mut self, now: SimTime) -> Result<()> {
        let dt = self.servo_period.as_secs();
        match self.robot {
            RobotFsmState::Home => {
                let signal = servo_tick(&self.scene, &self.cfg.servo, &mut self.servo_rng);
                let inputs = FsmInputs {
                    servo_assembly_done: signal.assembly_done,
                    legs_remaining: self.legs_remaining(),
                    ..FsmInputs::default()
                };
                self.apply_fsm(now, &inputs)?;
            }
            RobotFsmState::ReachAndGrasp => {
                let grid =
                    crate::servo::render_lyapunov_grid(&self.scene, &self.cfg.servo, &mut self.servo_rng);
                self.observer.on_grid(now, &grid);
                let signal = match crate::servo::select_control(&grid) {
                    Some(sel) => crate::servo::ServoSignal {
                        control: sel.control,
                        v_min: Some(sel.v_min),
                        terminate: sel.v_min < self.cfg.servo.terminate_threshold,
                        assembly_done: false,
                        target: sel.instance_id,
                    },
                    None => crate::servo::ServoSignal {
                        control: Vector3::zero(),
                        v_min: None,
                        terminate: false,
                        assembly_done: self.scene.unattached_count() == 0,
                        target: None,
                    },
                };
                if signal.assembly_done {
                    return Err(Error::contract(
                        "servoing with no graspable part in the scene",
                    ));
                }
                self.emit(
                    now,
                    EventKind::ServoCommand {
                        control: signal.control,
                        v_min: signal.v_min,
                        terminate: signal.terminate,
                    },
                );
                let inputs = FsmInputs {
                    servo_terminate: signal.terminate,
                    legs_remaining: self.legs_remaining(),
                    ..FsmInputs::default()
                };
                let commands = self.apply_fsm(now, &inputs)?;
                if commands.contains(&Command::ExecuteGrasp) {
                    let outcome = execute_grasp(&mut self.scene, &self.cfg.servo, &mut self.servo_rng)?;
                    self.grasp_attempts_this_cycle += 1;
                    self.emit(
                        now,
                        EventKind::GraspAttempt {
                            cycle: self.cycle,
                            part: outcome.part,
                            attempt: self.grasp_attempts_this_cycle,
                            success: outcome.success,
                            alignment_error: outcome.alignment_error,
                        },
                    );
                    let inputs = FsmInputs {
                        grasp_succeeded: Some(outcome.success),
                        legs_remaining: self.legs_remaining(),
                        ..FsmInputs::default()
                    };
                    self.apply_fsm(now, &inputs)?;
                    if !outcome.success
                        && self.grasp_attempts_this_cycle >= self.cfg.fsm.max_grasp_attempts
                    {
                        let cycle = self.cycle;
                        self.fail(FailureReason::GraspFailure, cycle);
                        if self.outcome.is_none() {
                            // continue policy: discard the part and go home
                            if let Some(part) =
                                self.scene.nearest_unattached(self.scene.ee_pose).map(|p| p.id)
                            {
                                self.scene.part_mut(part).unwrap().attached = true;
                            }
                            self.reset_to_home(now)?;
                        }
                    }
                } else if commands.contains(&Command::MoveServo) {
                    self.control_queue.push_back(signal.control);
                    let effective = if self.control_queue.len() > self.control_delay_ticks {
                        self.control_queue
                            .remove(self.control_queue.len() - 1 - self.control_delay_ticks)
                            .unwrap()
                    } else {
                        Vector3::zero()
                    };
                    self.scene.ee_pose += effective * dt;
                    self.scene.ee_pose = self.scene.workspace_bounds.clamp(self.scene.ee_pose);
                }
            }
            RobotFsmState::Pass => {
                let target = self.cfg.workspace.delivery_point;
                let offset = target - self.scene.ee_pose;
                let step = self.cfg.servo.max_speed * dt;
                if offset.norm() <= step {
                    self.scene.ee_pose = target;
                } else {
                    self.scene.ee_pose += offset.clamp_norm(step);
                }
                if let Gripper::Holding(id) = self.scene.gripper {
                    let ee = self.scene.ee_pose;
                    self.scene.part_mut(id).unwrap().position = ee;
                }
                let at_delivery =
                    (self.scene.ee_pose - target).norm() <= self.cfg.workspace.delivery_tolerance;
                let inputs = FsmInputs {
                    at_delivery_point: at_delivery,
                    legs_remaining: self.legs_remaining(),
                    ..FsmInputs::default()
                };
                self.apply_fsm(now, &inputs)?;
            }
            RobotFsmState::Idle => {}
            RobotFsmState::Handover => {
                let inputs = FsmInputs {
                    legs_remaining: self.legs_remaining(),
                    ..FsmInputs::default()
                };
                self.apply_fsm(now, &inputs)?;
            }
            RobotFsmState::Finished => {}
        }
        self.schedule(now + self.servo_period, ACT_SERVO);
        Ok(())
    }

    /// Continue-policy reset: abandon the current cycle and return home.
    fn reset_to_home(&mut self, now: SimTime) -> Result<()> {
        if self.robot != RobotFsmState::Home {
            self.emit(
                now,
                EventKind::FsmTransition {
                    from: self.robot,
                    to: RobotFsmState::Home,
                    commands: vec![],
                },
            );
            self.robot = RobotFsmState::Home;
        }
        if let Gripper::Holding(id) = self.scene.gripper {
            self.scene.part_mut(id).unwrap().attached = true;
            self.scene.gripper = Gripper::Open;
        }
        Ok(())
    }

    fn voice_release(&mut self, now: SimTime) -> Result<()> {
        if self.robot == RobotFsmState::Idle && matches!(self.scene.gripper, Gripper::Holding(_)) {
            let command_time = self.voice_command_time.take().unwrap_or(now);
            self.release(now, ReleaseTrigger::Voice { command_time })?;
        }
        Ok(())
    }

    fn run(mut self) -> Result<EpisodeTrace> {
        while let Some(Reverse((time, _, activity))) = self.queue.pop() {
            match activity {
                ACT_RECOGNITION => self.recognition_tick(time)?,
                ACT_SERVO => self.servo_tick_activity(time)?,
                ACT_VOICE => self.voice_release(time)?,
                ACT_TIMEOUT => {
                    if self.outcome.is_none() {
                        self.fail(FailureReason::Timeout, self.cycle);
                    }
                }
                _ => unreachable!(),
            }

            // success: robot finished and human done
            if self.outcome.is_none()
                && self.robot == RobotFsmState::Finished
                && self.human_done
            {
                self.outcome = Some(match self.first_failure {
                    None => EpisodeOutcome::FullSuccess,
                    Some((reason, at_cycle)) => EpisodeOutcome::Failed { reason, at_cycle },
                });
            }
            if let Some(outcome) = self.outcome.clone() {
                self.emit(time, EventKind::EpisodeEnd { outcome });
                break;
            }
        }
        if self.outcome.is_none() {
            return Err(Error::contract("event queue drained without an outcome"));
        }
        EpisodeTrace::from_events(TraceMeta::default(), self.cfg.clone(), self.events)
    }
}

/// Run one episode to completion. The trace is complete and deterministic in
/// `(config, seed)`.
pub fn run_episode(cfg: &EpisodeConfig) -> Result<EpisodeTrace> {
    run_episode_observed(cfg, &mut NullObserver)
}

/// Run one episode with observer hooks (e.g. per-tick grid dumps).
pub fn run_episode_observed<O: EpisodeObserver>(
    cfg: &EpisodeConfig,
    observer: &mut O,
) -> Result<EpisodeTrace> {
    Runner::new(cfg, observer)?.run()
}

/// Aggregated results of a batch run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub episodes: Vec<crate::eval::EpisodeSummary>,
}

/// Run `repetitions` independent episodes with seeds `seed_base + i`,
/// summarizing each trace. `sink` receives every full trace in episode order
/// (for persistence) before it is dropped.
pub fn run_experiment_with_sink<F>(
    cfg: &EpisodeConfig,
    repetitions: u32,
    seed_base: u64,
    mut sink: F,
) -> Result<ExperimentResults>
where
    F: FnMut(&EpisodeTrace) -> Result<()>,
{
    use rayon::prelude::*;
    if repetitions < 1 {
        return Err(Error::config("repetitions must be at least 1"));
    }
    cfg.validate()?;
    let mut episodes = Vec::with_capacity(repetitions as usize);
    const CHUNK: u32 = 64;
    let mut start = 0u32;
    while start < repetitions {
        let end = (start + CHUNK).min(repetitions);
        let chunk: Vec<EpisodeTrace> = (start..end)
            .into_par_iter()
            .map(|i| {
                let mut episode_cfg = cfg.clone();
                episode_cfg.seed = seed_base + i as u64;
                let mut trace = run_episode(&episode_cfg)?;
                trace.meta.episode_index = Some(i as u64);
                Ok(trace)
            })
            .collect::<Result<_>>()?;
        for trace in &chunk {
            sink(trace)?;
            episodes.push(crate::eval::summarize(trace)?);
        }
        start = end;
    }
    Ok(ExperimentResults { episodes })
}

/// [`run_experiment_with_sink`] without persistence.
pub fn run_experiment(
    cfg: &EpisodeConfig,
    repetitions: u32,
    seed_base: u64,
) -> Result<ExperimentResults> {
    run_experiment_with_sink(cfg, repetitions, seed_base, |_| Ok(()))
}

/// Per-participant aggregate of a paired two-mode run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParticipantPair {
    pub participant: u32,
    /// Mean handover time over this participant's released cycles, seconds.
    pub vision_mean_handover_s: Option<Real>,
    pub voice_mean_handover_s: Option<Real>,
    pub vision_mean_cycle_s: Option<Real>,
    pub voice_mean_cycle_s: Option<Real>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairedExperimentResults {
    pub vision: ExperimentResults,
    pub voice: ExperimentResults,
    pub pairs: Vec<ParticipantPair>,
}

/// Paired vision-vs-voice experiment with common random numbers: episode
/// `(participant, rep)` uses the same seed in both modes, so scene layout,
/// human durations and perception draws match and the modes differ only in
/// the release path.
pub fn run_paired_experiment_with_sink<F>(
    cfg: &EpisodeConfig,
    participants: u32,
    reps_per_participant: u32,
    seed_base: u64,
    mut sink: F,
) -> Result<PairedExperimentResults>
where
    F: FnMut(HumanMode, &EpisodeTrace) -> Result<()>,
{
    use rayon::prelude::*;
    if participants < 1 || reps_per_participant < 1 {
        return Err(Error::config(
            "participants and reps_per_participant must be at least 1",
        ));
    }
    cfg.validate()?;
    let modes = [HumanMode::Vision, HumanMode::VoiceCommand];
    let mut results: Vec<ExperimentResults> = Vec::new();
    for mode in modes {
        let mut mode_cfg = cfg.clone();
        mode_cfg.human.mode = mode;
        let mut episodes = Vec::new();
        let jobs: Vec<(u32, u32)> = (0..participants)
            .flat_map(|p| (0..reps_per_participant).map(move |r| (p, r)))
            .collect();
        for chunk in jobs.chunks(64) {
            let traces: Vec<EpisodeTrace> = chunk
                .par_iter()
                .map(|&(p, r)| {
                    let mut episode_cfg = mode_cfg.clone();
                    episode_cfg.seed =
                        seed_base + (p as u64) * reps_per_participant as u64 + r as u64;
                    let mut trace = run_episode(&episode_cfg)?;
                    trace.meta.participant = Some(p);
                    trace.meta.rep = Some(r);
                    Ok(trace)
                })
                .collect::<Result<_>>()?;
            for trace in &traces {
                sink(mode, trace)?;
                episodes.push(crate::eval::summarize(trace)?);
            }
        }
        results.push(ExperimentResults { episodes });
    }
    let voice = results.pop().unwrap();
    let vision = results.pop().unwrap();
    let pairs = participant_pairs(participants, &vision, &voice);
    Ok(PairedExperimentResults {
        vision,
        voice,
        pairs,
    })
}

pub fn run_paired_experiment(
    cfg: &EpisodeConfig,
    participants: u32,
    reps_per_participant: u32,
    seed_base: u64,
) -> Result<PairedExperimentResults> {
    run_paired_experiment_with_sink(cfg, participants, reps_per_participant, seed_base, |_, _| {
        Ok(())
    })
}

fn participant_pairs(
    participants: u32,
    vision: &ExperimentResults,
    voice: &ExperimentResults,
) -> Vec<ParticipantPair> {
    let mean_of = |results: &ExperimentResults,
                   participant: u32,
                   f: &dyn Fn(&crate::eval::CycleMetrics) -> Option<Real>|
     -> Option<Real> {
        let values: Vec<Real> = results
            .episodes
            .iter()
            .filter(|e| e.meta.participant == Some(participant))
            .flat_map(|e| e.cycles.iter())
            .filter_map(f)
            .collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<Real>() / values.len() as Real)
        }
    };
    (0..participants)
        .map(|p| ParticipantPair {
            participant: p,
            vision_mean_handover_s: mean_of(vision, p, &|c| c.handover_time_s),
            voice_mean_handover_s: mean_of(voice, p, &|c| c.handover_time_s),
            vision_mean_cycle_s: mean_of(vision, p, &|c| {
                c.succeeded.then_some(c.cycle_time_s)
            }),
            voice_mean_cycle_s: mean_of(voice, p, &|c| c.succeeded.then_some(c.cycle_time_s)),
        })
        .collect()
}

/// Output path for an episode within an experiment directory.
pub fn trace_file_name(mode: HumanMode, meta: &TraceMeta) -> PathBuf {
    let mode = match mode {
        HumanMode::Vision => "vision",
        HumanMode::VoiceCommand => "voice",
    };
    match (meta.participant, meta.rep, meta.episode_index) {
        (Some(p), Some(r), _) => PathBuf::from(format!("p{p:02}_r{r:03}_{mode}.jsonl")),
        (_, _, Some(i)) => PathBuf::from(format!("ep{i:05}_{mode}.jsonl")),
        _ => PathBuf::from(format!("episode_{mode}.jsonl")),
    }
}
