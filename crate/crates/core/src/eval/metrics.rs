//! Per-cycle timing, fluency ratios and success-rate decomposition, all
//! reconstructed from event traces.

use serde::{Deserialize, Serialize};

use crate::action::AtomicAction;
use crate::error::{Error, Result};
use crate::event::{EpisodeOutcome, EventKind};
use crate::fsm::RobotFsmState;
use crate::human::HumanMode;
use crate::trace::{EpisodeTrace, TraceMeta};
use crate::Real;

/// Metrics for one assembly cycle.
///
/// Cycle windows are inter-release intervals (the first from episode start);
/// a trailing window is added for a cycle that failed. The activity ratios
/// are each bounded to [0,1] but measure different overlaps, so no joint
/// bound links them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleMetrics {
    pub cycle_index: u32,
    /// Hand closure to release, seconds; `None` for failed cycles. Clamped
    /// at zero when the release preceded the closure (pre-released part).
    pub handover_time_s: Option<Real>,
    pub cycle_time_s: Real,
    /// Fraction of the cycle the human idles while the robot is not ready.
    pub h_idle_ratio: Real,
    /// Fraction of the cycle the robot waits in idle.
    pub r_idle_ratio: Real,
    /// Fraction of the cycle both sides act concurrently.
    pub c_act_ratio: Real,
    pub grasp_attempts: u32,
    /// Each human grasp attempt counts once, so a retried handover
    /// contributes two attempts to the denominator.
    pub handover_attempts: u32,
    pub succeeded: bool,
}

/// Trace digest: outcome, per-cycle metrics and raw success counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub meta: TraceMeta,
    pub mode: HumanMode,
    pub outcome: EpisodeOutcome,
    pub cycles: Vec<CycleMetrics>,
    pub cycles_started: u64,
    pub grasp_attempts: u64,
    pub grasp_successes: u64,
    pub handover_attempts: u64,
    pub releases: u64,
}

/// Step-function timelines reconstructed from a trace.
struct Timeline {
    /// (time_us, state); first entry at 0.
    robot: Vec<(u64, RobotFsmState)>,
    human: Vec<(u64, AtomicAction)>,
    end_us: u64,
}

impl Timeline {
    fn build(trace: &EpisodeTrace) -> Result<Self> {
        let mut robot = vec![(0u64, RobotFsmState::Home)];
        let mut human = vec![(0u64, AtomicAction::NoAssemblyAction)];
        let mut end_us = None;
        for event in &trace.events {
            let t = event.time.as_micros();
            match &event.kind {
                EventKind::FsmTransition { to, .. } => robot.push((t, *to)),
                EventKind::TrueHumanAction { action, .. } => human.push((t, *action)),
                EventKind::EpisodeEnd { .. } => end_us = Some(t),
                _ => {}
            }
        }
        let end_us = end_us.ok_or_else(|| Error::trace("trace has no episode_end"))?;
        Ok(Timeline {
            robot,
            human,
            end_us,
        })
    }

    fn value_at<V: Copy>(steps: &[(u64, V)], t: u64) -> V {
        match steps.binary_search_by_key(&t, |&(time, _)| time) {
            Ok(mut i) => {
                // same-time updates: the last one wins
                while i + 1 < steps.len() && steps[i + 1].0 == t {
                    i += 1;
                }
                steps[i].1
            }
            Err(i) => steps[i - 1].1,
        }
    }

    /// Integrate `pred` over [a, b), in microseconds.
    fn integrate(
        &self,
        a: u64,
        b: u64,
        pred: impl Fn(RobotFsmState, AtomicAction) -> bool,
    ) -> u64 {
        let mut cuts: Vec<u64> = vec![a, b];
        cuts.extend(
            self.robot
                .iter()
                .map(|&(t, _)| t)
                .filter(|&t| t > a && t < b),
        );
        cuts.extend(
            self.human
                .iter()
                .map(|&(t, _)| t)
                .filter(|&t| t > a && t < b),
        );
        cuts.sort_unstable();
        cuts.dedup();
        let mut total = 0;
        for pair in cuts.windows(2) {
            let (s, e) = (pair[0], pair[1]);
            let robot = Self::value_at(&self.robot, s);
            let human = Self::value_at(&self.human, s);
            if pred(robot, human) {
                total += e - s;
            }
        }
        total
    }
}

/// Human grasp onsets: times where the true action switches to `HumanGrasp`,
/// classified live (the part was still held) or pre-released by walking the
/// event order.
fn grasp_onsets(trace: &EpisodeTrace) -> Vec<(u64, bool)> {
    let mut onsets = Vec::new();
    let mut last_action = AtomicAction::NoAssemblyAction;
    let mut releases_seen = 0u32;
    let mut legs_consumed = 0u32;
    let mut pending = false;
    for event in &trace.events {
        match &event.kind {
            EventKind::Release { .. } => {
                releases_seen += 1;
                if pending && releases_seen > legs_consumed {
                    legs_consumed += 1;
                    pending = false;
                }
            }
            EventKind::TrueHumanAction { action, .. } => {
                if *action == AtomicAction::HumanGrasp && last_action != AtomicAction::HumanGrasp {
                    let live = releases_seen <= legs_consumed;
                    if live {
                        pending = true;
                    } else {
                        // the part was already released: instant resolution
                        legs_consumed += 1;
                    }
                    onsets.push((event.time.as_micros(), live));
                }
                last_action = *action;
            }
            _ => {}
        }
    }
    onsets
}

/// Compute per-cycle metrics for one trace. Traces with no cycles (nothing
/// released and nothing started) yield an empty list.
pub fn compute_cycle_metrics(trace: &EpisodeTrace) -> Result<Vec<CycleMetrics>> {
    let timeline = Timeline::build(trace)?;
    let releases: Vec<(u64, u32)> = trace
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::Release { cycle, .. } => Some((e.time.as_micros(), *cycle)),
            _ => None,
        })
        .collect();
    let onsets = grasp_onsets(trace);
    let grasp_attempts: Vec<(u32, bool)> = trace
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::GraspAttempt { cycle, success, .. } => Some((*cycle, *success)),
            _ => None,
        })
        .collect();

    let mut windows: Vec<(u64, u64, Option<u32>)> = Vec::new(); // (start, end, released cycle)
    let mut prev = 0u64;
    for &(t, cycle) in &releases {
        windows.push((prev, t, Some(cycle)));
        prev = t;
    }
    if let EpisodeOutcome::Failed { .. } = trace.outcome {
        if timeline.end_us > prev {
            windows.push((prev, timeline.end_us, None));
        }
    }

    let mut out = Vec::new();
    for (start, end, released_cycle) in windows {
        let span = end.saturating_sub(start).max(1);
        let cycle_time_s = span as Real / 1e6;
        let cycle_index = released_cycle.unwrap_or(releases.len() as u32 + 1);

        // handover time: latest live closure in the window, else clamp to 0
        let handover_time_s = released_cycle.map(|_| {
            onsets
                .iter()
                .filter(|&&(t, live)| live && t > start && t <= end)
                .map(|&(t, _)| (end - t) as Real / 1e6)
                .last()
                .unwrap_or(0.0)
        });

        let live_onsets = onsets
            .iter()
            .filter(|&&(t, live)| live && t > start && t <= end)
            .count() as u32;
        let handover_attempts = if released_cycle.is_some() {
            live_onsets.max(1)
        } else {
            live_onsets
        };
        let grasps = grasp_attempts
            .iter()
            .filter(|&&(c, _)| c == cycle_index)
            .count() as u32;

        let h_idle = timeline.integrate(start, end, |robot, human| {
            human == AtomicAction::NoAssemblyAction && robot != RobotFsmState::Idle
        });
        let r_idle = timeline.integrate(start, end, |robot, _| robot == RobotFsmState::Idle);
        let c_act = timeline.integrate(start, end, |robot, human| {
            human != AtomicAction::NoAssemblyAction
                && !matches!(robot, RobotFsmState::Idle | RobotFsmState::Finished)
        });

        out.push(CycleMetrics {
            cycle_index,
            handover_time_s,
            cycle_time_s,
            h_idle_ratio: h_idle as Real / span as Real,
            r_idle_ratio: r_idle as Real / span as Real,
            c_act_ratio: c_act as Real / span as Real,
            grasp_attempts: grasps,
            handover_attempts,
            succeeded: released_cycle.is_some(),
        });
    }
    Ok(out)
}

/// Digest a trace into its summary.
pub fn summarize(trace: &EpisodeTrace) -> Result<EpisodeSummary> {
    let cycles = compute_cycle_metrics(trace)?;
    let mut cycles_started = 0u64;
    let mut grasp_attempts = 0u64;
    let mut grasp_successes = 0u64;
    let mut releases = 0u64;
    for event in &trace.events {
        match &event.kind {
            EventKind::FsmTransition { from, to, .. }
                if *from == RobotFsmState::Home && *to == RobotFsmState::ReachAndGrasp =>
            {
                cycles_started += 1;
            }
            EventKind::FsmTransition { from, to, .. }
                if *from == RobotFsmState::Home && *to == RobotFsmState::Idle =>
            {
                // handover-only setup transition counts as its single cycle
                cycles_started += 1;
            }
            EventKind::GraspAttempt { success, .. } => {
                grasp_attempts += 1;
                grasp_successes += *success as u64;
            }
            EventKind::Release { .. } => releases += 1,
            _ => {}
        }
    }
    let handover_attempts = cycles.iter().map(|c| c.handover_attempts as u64).sum();
    Ok(EpisodeSummary {
        seed: trace.config.seed,
        meta: trace.meta.clone(),
        mode: trace.config.human.mode,
        outcome: trace.outcome.clone(),
        cycles,
        cycles_started,
        grasp_attempts,
        grasp_successes,
        handover_attempts,
        releases,
    })
}

/// A ratio with explicit counts; the rate is undefined (never 0/0) when the
/// denominator is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateCount {
    pub successes: u64,
    pub attempts: u64,
}

impl RateCount {
    pub fn rate(&self) -> Option<Real> {
        (self.attempts > 0).then(|| self.successes as Real / self.attempts as Real)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessRates {
    pub grasp: RateCount,
    pub handover: RateCount,
    pub cycle: RateCount,
    pub full_assembly: RateCount,
}

/// Aggregate success rates over episode summaries.
pub fn success_rates(episodes: &[EpisodeSummary]) -> Result<SuccessRates> {
    if episodes.is_empty() {
        return Err(Error::config("success_rates requires at least one episode"));
    }
    let mut rates = SuccessRates::default();
    for e in episodes {
        rates.grasp.attempts += e.grasp_attempts;
        rates.grasp.successes += e.grasp_successes;
        rates.handover.attempts += e.handover_attempts;
        rates.handover.successes += e.releases;
        rates.cycle.attempts += e.cycles_started;
        rates.cycle.successes += e.releases.min(e.cycles_started);
        rates.full_assembly.attempts += 1;
        rates.full_assembly.successes += (e.outcome == EpisodeOutcome::FullSuccess) as u64;
    }
    Ok(rates)
}

/// [`success_rates`] straight from traces.
pub fn success_rates_from_traces(traces: &[EpisodeTrace]) -> Result<SuccessRates> {
    let summaries: Vec<EpisodeSummary> = traces.iter().map(summarize).collect::<Result<_>>()?;
    success_rates(&summaries)
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: String,
    pub participant: String,
    pub mode: String,
    pub cycle_index: u32,
    pub handover_time_s: Option<Real>,
    pub cycle_time_s: Real,
    pub h_idle: Real,
    pub r_idle: Real,
    pub c_act: Real,
    pub succeeded: bool,
}

fn episode_key(meta: &TraceMeta) -> String {
    match (meta.participant, meta.rep, meta.episode_index) {
        (Some(p), Some(r), _) => format!("p{p:02}_r{r:03}"),
        (_, _, Some(i)) => format!("ep{i:05}"),
        _ => "episode".to_string(),
    }
}

/// Write per-cycle metrics as CSV with header `episode,participant,mode,
/// cycle_index,handover_time_s,cycle_time_s,h_idle,r_idle,c_act,succeeded`.
pub fn write_metrics_csv<W: std::io::Write>(
    episodes: &[EpisodeSummary],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "episode",
        "participant",
        "mode",
        "cycle_index",
        "handover_time_s",
        "cycle_time_s",
        "h_idle",
        "r_idle",
        "c_act",
        "succeeded",
    ])?;
    for e in episodes {
        let mode = match e.mode {
            HumanMode::Vision => "vision",
            HumanMode::VoiceCommand => "voice",
        };
        for c in &e.cycles {
            w.write_record([
                episode_key(&e.meta),
                e.meta
                    .participant
                    .map(|p| p.to_string())
                    .unwrap_or_default(),
                mode.to_string(),
                c.cycle_index.to_string(),
                c.handover_time_s.map(|t| format!("{t}")).unwrap_or_default(),
                format!("{}", c.cycle_time_s),
                format!("{}", c.h_idle_ratio),
                format!("{}", c.r_idle_ratio),
                format!("{}", c.c_act_ratio),
                c.succeeded.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a metrics CSV written by [`write_metrics_csv`].
pub fn read_metrics_csv<R: std::io::Read>(reader: R) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(reader);
    {
        let headers = r.headers()?;
        let expected = [
            "episode",
            "participant",
            "mode",
            "cycle_index",
            "handover_time_s",
            "cycle_time_s",
            "h_idle",
            "r_idle",
            "c_act",
            "succeeded",
        ];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::config(format!(
                "metrics CSV header mismatch: got {headers:?}"
            )));
        }
    }
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("");
        let parse = |i: usize| -> Result<Real> {
            get(i)
                .parse()
                .map_err(|e| Error::config(format!("metrics CSV field {i}: {e}")))
        };
        rows.push(MetricsRow {
            episode: get(0).to_string(),
            participant: get(1).to_string(),
            mode: get(2).to_string(),
            cycle_index: get(3)
                .parse()
                .map_err(|e| Error::config(format!("bad cycle_index: {e}")))?,
            handover_time_s: if get(4).is_empty() {
                None
            } else {
                Some(parse(4)?)
            },
            cycle_time_s: parse(5)?,
            h_idle: parse(6)?,
            r_idle: parse(7)?,
            c_act: parse(8)?,
            succeeded: get(9) == "true",
        });
    }
    Ok(rows)
}
