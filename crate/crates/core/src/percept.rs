//! Stochastic stand-in for the action-recognition network.
//!
//! The real recognizer is replaced by a per-class confusion channel: at each
//! recognition tick the predicted label is sampled from the confusion row of
//! the current ground-truth action. The matrix is built from per-class recall
//! targets; off-diagonal mass is routed mostly to the idle class, matching
//! the observed bias of the trained network, and a confidence-scaling
//! correction for that bias is applied on the synthesized confidence vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::{AtomicAction, ACTION_COUNT};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::Real;

/// Default per-class recall targets, in action enumeration order.
///
/// These are the reported per-action recall figures of the reference
/// recognizer and serve as calibration targets for the channel.
pub const REFERENCE_RECALL: [Real; ACTION_COUNT] = [0.80, 0.13, 0.80, 0.52, 0.61, 0.37, 0.56, 0.17];

/// Reported per-action precision of the reference recognizer. Not a model
/// input: printed by the calibration report next to the achieved values.
pub const REFERENCE_PRECISION: [Real; ACTION_COUNT] =
    [0.72, 0.40, 0.79, 0.64, 0.79, 0.48, 0.66, 0.27];

/// Default frame-level class priors (duration-weighted guesses, not
/// published values; override in config when better estimates exist).
pub const DEFAULT_PRIORS: [Real; ACTION_COUNT] = [0.35, 0.05, 0.05, 0.06, 0.25, 0.13, 0.06, 0.05];

/// How each row's off-diagonal probability mass is distributed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum OffDiagonalPolicy {
    /// Fraction `beta` of the miss mass goes to `NoAssemblyAction`, the rest
    /// proportionally to the priors of the remaining classes. For the
    /// `NoAssemblyAction` row itself all miss mass follows the priors.
    NoAssemblyBias { beta: Real },
    /// All miss mass proportional to the priors of the other classes.
    ProportionalToPriors,
}

impl Default for OffDiagonalPolicy {
    fn default() -> Self {
        OffDiagonalPolicy::NoAssemblyBias { beta: 0.6 }
    }
}

/// Build a row-stochastic confusion matrix (row = true class, column =
/// predicted class) whose diagonal equals `per_class_recall` exactly.
pub fn build_confusion_matrix(
    per_class_recall: &[Real; ACTION_COUNT],
    policy: OffDiagonalPolicy,
    priors: &[Real; ACTION_COUNT],
) -> Result<[[Real; ACTION_COUNT]; ACTION_COUNT]> {
    for (i, &r) in per_class_recall.iter().enumerate() {
        if !(0.0..=1.0).contains(&r) || !r.is_finite() {
            return Err(Error::config(format!(
                "recall for {} must lie in [0,1], got {r}",
                AtomicAction::ALL[i]
            )));
        }
    }
    let prior_sum: Real = priors.iter().sum();
    if priors.iter().any(|&p| p < 0.0 || !p.is_finite()) || (prior_sum - 1.0).abs() > 1e-6 {
        return Err(Error::config(format!(
            "priors must be non-negative and sum to 1, got sum {prior_sum}"
        )));
    }
    if let OffDiagonalPolicy::NoAssemblyBias { beta } = policy {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::config(format!("beta must lie in [0,1], got {beta}")));
        }
    }

    let idle = AtomicAction::NoAssemblyAction.index();
    let mut matrix = [[0.0; ACTION_COUNT]; ACTION_COUNT];
    for i in 0..ACTION_COUNT {
        let recall = per_class_recall[i];
        matrix[i][i] = recall;
        let miss = 1.0 - recall;
        if miss == 0.0 {
            continue;
        }
        let (to_idle, proportional) = match policy {
            OffDiagonalPolicy::NoAssemblyBias { beta } if i != idle => {
                (beta * miss, (1.0 - beta) * miss)
            }
            _ => (0.0, miss),
        };
        if i != idle {
            matrix[i][idle] += to_idle;
        }
        // spread the remainder over columns other than the diagonal (and the
        // idle column when it already took its share)
        let exclude_idle = i != idle && matches!(policy, OffDiagonalPolicy::NoAssemblyBias { .. });
        let eligible: Vec<usize> = (0..ACTION_COUNT)
            .filter(|&j| j != i && (!exclude_idle || j != idle))
            .collect();
        let weight_sum: Real = eligible.iter().map(|&j| priors[j]).sum();
        if weight_sum > 0.0 {
            for &j in &eligible {
                matrix[i][j] += proportional * priors[j] / weight_sum;
            }
        } else {
            let w = proportional / eligible.len() as Real;
            for &j in &eligible {
                matrix[i][j] += w;
            }
        }
    }
    Ok(matrix)
}

fn validate_row_stochastic(matrix: &[[Real; ACTION_COUNT]; ACTION_COUNT]) -> Result<()> {
    for (i, row) in matrix.iter().enumerate() {
        if row.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::config(format!("confusion row {i} has negative entries")));
        }
        let sum: Real = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "confusion row {i} sums to {sum}, expected 1"
            )));
        }
    }
    Ok(())
}

/// Recognizer channel parameters (config form).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecognizerConfig {
    pub per_class_recall: [Real; ACTION_COUNT],
    pub off_diagonal: OffDiagonalPolicy,
    pub priors: [Real; ACTION_COUNT],
    /// Sliding-window length in frames; predictions start at this frame.
    pub window_len: u64,
    /// Inference rate in frames per second.
    pub frame_rate: Real,
    /// Frame rate the recognizer was calibrated at; a mismatch degrades recall.
    pub trained_frame_rate: Real,
    /// Linear recall degradation per unit of relative frame-rate mismatch.
    pub mismatch_slope: Real,
    /// Confidence scale applied to the `NoAssemblyAction` entry, in (0,1].
    pub no_assembly_scale: Real,
    /// Mass spread off the sampled label when synthesizing confidences.
    pub confidence_spread: Real,
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        RecognizerConfig {
            per_class_recall: REFERENCE_RECALL,
            off_diagonal: OffDiagonalPolicy::default(),
            priors: DEFAULT_PRIORS,
            window_len: 16,
            frame_rate: 10.0,
            trained_frame_rate: 10.0,
            mismatch_slope: 1.0,
            no_assembly_scale: 0.5,
            confidence_spread: 0.3,
        }
    }
}

impl RecognizerConfig {
    /// A perfect channel: identity confusion, no bias correction needed.
    pub fn oracle() -> Self {
        RecognizerConfig {
            per_class_recall: [1.0; ACTION_COUNT],
            no_assembly_scale: 1.0,
            ..RecognizerConfig::default()
        }
    }

    pub fn build(&self) -> Result<RecognizerModel> {
        RecognizerModel::from_config(self)
    }
}

/// Immutable recognizer channel model.
#[derive(Debug, Clone, PartialEq)]
pub struct RecognizerModel {
    confusion: [[Real; ACTION_COUNT]; ACTION_COUNT],
    pub window_len: u64,
    pub frame_rate: Real,
    pub no_assembly_scale: Real,
    pub confidence_spread: Real,
}

impl RecognizerModel {
    pub fn from_config(cfg: &RecognizerConfig) -> Result<Self> {
        if cfg.window_len < 1 {
            return Err(Error::config("window_len must be at least 1"));
        }
        if !(cfg.frame_rate > 0.0) || !(cfg.trained_frame_rate > 0.0) {
            return Err(Error::config("frame rates must be positive"));
        }
        if !(cfg.no_assembly_scale > 0.0 && cfg.no_assembly_scale <= 1.0) {
            return Err(Error::config(format!(
                "no_assembly_scale must lie in (0,1], got {}",
                cfg.no_assembly_scale
            )));
        }
        if !(0.0..1.0).contains(&cfg.confidence_spread) {
            return Err(Error::config("confidence_spread must lie in [0,1)"));
        }
        if cfg.mismatch_slope < 0.0 {
            return Err(Error::config("mismatch_slope must be non-negative"));
        }

        // Frame-rate mismatch degrades recall linearly before matrix build.
        let mismatch =
            (cfg.frame_rate - cfg.trained_frame_rate).abs() / cfg.trained_frame_rate;
        let factor = (1.0 - cfg.mismatch_slope * mismatch).max(0.0);
        let mut recalls = cfg.per_class_recall;
        if factor < 1.0 {
            for r in recalls.iter_mut() {
                *r *= factor;
            }
        }

        let confusion = build_confusion_matrix(&recalls, cfg.off_diagonal, &cfg.priors)?;
        Ok(RecognizerModel {
            confusion,
            window_len: cfg.window_len,
            frame_rate: cfg.frame_rate,
            no_assembly_scale: cfg.no_assembly_scale,
            confidence_spread: cfg.confidence_spread,
        })
    }

    /// Wrap an explicit matrix (e.g. loaded from CSV).
    pub fn from_matrix(
        confusion: [[Real; ACTION_COUNT]; ACTION_COUNT],
        window_len: u64,
        frame_rate: Real,
        no_assembly_scale: Real,
        confidence_spread: Real,
    ) -> Result<Self> {
        validate_row_stochastic(&confusion)?;
        Ok(RecognizerModel {
            confusion,
            window_len,
            frame_rate,
            no_assembly_scale,
            confidence_spread,
        })
    }

    pub fn confusion(&self) -> &[[Real; ACTION_COUNT]; ACTION_COUNT] {
        &self.confusion
    }

    /// Achieved precision per class implied by the priors and the channel:
    /// `P(true = j | predicted = j)`. Undefined columns yield `None`.
    pub fn achieved_precision(&self, priors: &[Real; ACTION_COUNT]) -> [Option<Real>; ACTION_COUNT] {
        let mut out = [None; ACTION_COUNT];
        for (j, slot) in out.iter_mut().enumerate() {
            let col_mass: Real = (0..ACTION_COUNT).map(|i| priors[i] * self.confusion[i][j]).sum();
            if col_mass > 0.0 {
                *slot = Some(priors[j] * self.confusion[j][j] / col_mass);
            }
        }
        out
    }
}

/// A per-tick prediction for the most recent frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPrediction {
    pub frame_index: u64,
    /// Argmax of the bias-adjusted confidence vector.
    pub label: AtomicAction,
    pub confidence: [Real; ACTION_COUNT],
}

/// Scale the idle-class confidence down by `lambda` and re-take the argmax
/// (ties resolve to the lowest enumeration index). No renormalization: only
/// the argmax is consumed downstream.
pub fn apply_confidence_bias(
    confidence: &[Real; ACTION_COUNT],
    lambda: Real,
) -> Result<([Real; ACTION_COUNT], AtomicAction)> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::config(format!(
            "confidence scale must lie in (0,1], got {lambda}"
        )));
    }
    if confidence.iter().any(|&c| c < 0.0 || !c.is_finite()) {
        return Err(Error::config("confidence entries must be non-negative"));
    }
    let mut adjusted = *confidence;
    adjusted[AtomicAction::NoAssemblyAction.index()] *= lambda;
    let mut best = 0;
    for (i, &v) in adjusted.iter().enumerate() {
        if v > adjusted[best] {
            best = i;
        }
    }
    Ok((adjusted, AtomicAction::from_index(best)?))
}

/// Stateful wrapper enforcing the tick contract (strictly consecutive frame
/// indices from 1).
#[derive(Debug, Clone)]
pub struct Recognizer {
    model: RecognizerModel,
    last_frame: Option<u64>,
}

impl Recognizer {
    pub fn new(model: RecognizerModel) -> Self {
        Recognizer {
            model,
            last_frame: None,
        }
    }

    pub fn model(&self) -> &RecognizerModel {
        &self.model
    }

    /// One recognition tick. Returns `None` while the frame buffer fills
    /// (frame_index < window_len), afterwards exactly one prediction per
    /// frame.
    pub fn tick(
        &mut self,
        frame_index: u64,
        true_action: AtomicAction,
        rng: &mut SimRng,
    ) -> Result<Option<ActionPrediction>> {
        let expected = self.last_frame.map_or(1, |f| f + 1);
        if frame_index != expected {
            return Err(Error::contract(format!(
                "non-monotone frame index: got {frame_index}, expected {expected}"
            )));
        }
        self.last_frame = Some(frame_index);
        if frame_index < self.model.window_len {
            return Ok(None);
        }

        // Sample the predicted label from the confusion row of the true action.
        let row = &self.model.confusion[true_action.index()];
        let draw: Real = rng.random_range(0.0..1.0);
        let mut acc = 0.0;
        let mut sampled = ACTION_COUNT - 1;
        for (j, &p) in row.iter().enumerate() {
            acc += p;
            if draw < acc {
                sampled = j;
                break;
            }
        }

        // Synthesize a confidence vector peaked at the sampled label, then
        // apply the idle-bias correction.
        let spread = self.model.confidence_spread;
        let mut confidence = [spread / (ACTION_COUNT - 1) as Real; ACTION_COUNT];
        confidence[sampled] = 1.0 - spread;
        let (adjusted, label) = apply_confidence_bias(&confidence, self.model.no_assembly_scale)?;

        Ok(Some(ActionPrediction {
            frame_index,
            label,
            confidence: adjusted,
        }))
    }
}

/// Write a confusion matrix as CSV: a header row of action names followed by
/// eight rows of eight probabilities.
pub fn confusion_to_csv<W: std::io::Write>(
    matrix: &[[Real; ACTION_COUNT]; ACTION_COUNT],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(AtomicAction::ALL.iter().map(|a| a.name()))?;
    for row in matrix {
        w.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a confusion matrix written by [`confusion_to_csv`], validating the
/// header and row-stochasticity.
pub fn confusion_from_csv<R: std::io::Read>(
    reader: R,
) -> Result<[[Real; ACTION_COUNT]; ACTION_COUNT]> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    for (i, name) in header.iter().enumerate() {
        let expected = AtomicAction::from_index(i)?;
        if name != expected.name() {
            return Err(Error::config(format!(
                "confusion CSV column {i} is {name:?}, expected {:?}",
                expected.name()
            )));
        }
    }
    if header.len() != ACTION_COUNT {
        return Err(Error::config(format!(
            "confusion CSV must have {ACTION_COUNT} columns, got {}",
            header.len()
        )));
    }
    let mut matrix = [[0.0; ACTION_COUNT]; ACTION_COUNT];
    let mut rows = 0;
    for (i, record) in r.records().enumerate() {
        let record = record?;
        if i >= ACTION_COUNT {
            return Err(Error::config("confusion CSV has more than 8 data rows"));
        }
        for j in 0..ACTION_COUNT {
            let field = record
                .get(j)
                .ok_or_else(|| Error::config(format!("confusion CSV row {i} is short")))?;
            matrix[i][j] = field
                .parse()
                .map_err(|e| Error::config(format!("confusion CSV row {i} col {j}: {e}")))?;
        }
        rows += 1;
    }
    if rows != ACTION_COUNT {
        return Err(Error::config(format!(
            "confusion CSV must have {ACTION_COUNT} data rows, got {rows}"
        )));
    }
    validate_row_stochastic(&matrix)?;
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use proptest::prelude::*;

    fn paper_model() -> RecognizerModel {
        RecognizerConfig::default().build().unwrap()
    }

    #[test]
    fn rows_sum_to_one_and_diagonal_matches_recall() {
        let m = paper_model();
        for (i, row) in m.confusion().iter().enumerate() {
            let sum: Real = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "row {i} sums to {sum}");
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!((row[i] - REFERENCE_RECALL[i]).abs() < 1e-12);
        }
        // reach diagonal pinned to the reported recall
        let reach = AtomicAction::Reach.index();
        assert_eq!(m.confusion()[reach][reach], 0.13);
    }

    #[test]
    fn perfect_recall_gives_identity() {
        let m = build_confusion_matrix(
            &[1.0; ACTION_COUNT],
            OffDiagonalPolicy::default(),
            &DEFAULT_PRIORS,
        )
        .unwrap();
        for i in 0..ACTION_COUNT {
            for j in 0..ACTION_COUNT {
                assert_eq!(m[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn beta_one_routes_all_miss_mass_to_idle() {
        let mut recalls = [1.0; ACTION_COUNT];
        recalls[AtomicAction::SpinLeg.index()] = 0.61;
        let m = build_confusion_matrix(
            &recalls,
            OffDiagonalPolicy::NoAssemblyBias { beta: 1.0 },
            &DEFAULT_PRIORS,
        )
        .unwrap();
        let spin = AtomicAction::SpinLeg.index();
        let idle = AtomicAction::NoAssemblyAction.index();
        assert!((m[spin][idle] - 0.39).abs() < 1e-12);
    }

    #[test]
    fn recall_out_of_range_is_rejected() {
        let mut recalls = REFERENCE_RECALL;
        recalls[2] = 1.2;
        assert!(
            build_confusion_matrix(&recalls, OffDiagonalPolicy::default(), &DEFAULT_PRIORS)
                .is_err()
        );
    }

    #[test]
    fn buffering_frames_yield_no_prediction() {
        let mut rec = Recognizer::new(paper_model());
        let mut rng = seeded_rng(1);
        for frame in 1..16 {
            let out = rec.tick(frame, AtomicAction::Reach, &mut rng).unwrap();
            assert!(out.is_none(), "frame {frame} should be buffered");
        }
        let out = rec.tick(16, AtomicAction::Reach, &mut rng).unwrap();
        assert!(out.is_some());
        assert_eq!(out.unwrap().frame_index, 16);
    }

    #[test]
    fn identity_channel_echoes_the_true_action() {
        let mut rec = Recognizer::new(RecognizerConfig::oracle().build().unwrap());
        let mut rng = seeded_rng(2);
        for frame in 1..=40 {
            let action = AtomicAction::ALL[(frame as usize) % ACTION_COUNT];
            if let Some(pred) = rec.tick(frame, action, &mut rng).unwrap() {
                assert_eq!(pred.label, action);
            }
        }
    }

    #[test]
    fn non_monotone_frame_index_is_a_contract_violation() {
        let mut rec = Recognizer::new(paper_model());
        let mut rng = seeded_rng(3);
        rec.tick(1, AtomicAction::Reach, &mut rng).unwrap();
        assert!(rec.tick(3, AtomicAction::Reach, &mut rng).is_err());
    }

    #[test]
    fn grasp_recall_matches_reported_rate() {
        // Monte Carlo check of the reported human-grasp recall (0.17 +- 1pp).
        let model = paper_model();
        let mut rec = Recognizer::new(model);
        let mut rng = seeded_rng(42);
        let mut hits = 0u32;
        let n = 10_000;
        for frame in 1..=(n + 15) {
            if let Some(p) = rec.tick(frame, AtomicAction::HumanGrasp, &mut rng).unwrap() {
                if p.label == AtomicAction::HumanGrasp {
                    hits += 1;
                }
            }
        }
        let rate = hits as Real / n as Real;
        assert!((rate - 0.17).abs() < 0.01, "grasp recall {rate}");
    }

    #[test]
    fn long_run_confusion_matches_model_chi_squared() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let model = paper_model();
        let matrix = *model.confusion();
        let n = 100_000u32;
        for (i, &action) in AtomicAction::ALL.iter().enumerate() {
            let mut rec = Recognizer::new(model.clone());
            let mut rng = seeded_rng(4000 + i as u64);
            let mut counts = [0u32; ACTION_COUNT];
            let mut seen = 0u32;
            let mut frame = 0u64;
            while seen < n {
                frame += 1;
                if let Some(p) = rec.tick(frame, action, &mut rng).unwrap() {
                    counts[p.label.index()] += 1;
                    seen += 1;
                }
            }
            let mut chi2 = 0.0;
            let mut dof: i32 = -1;
            for j in 0..ACTION_COUNT {
                let expected = matrix[i][j] * n as Real;
                if expected == 0.0 {
                    assert_eq!(counts[j], 0, "impossible label sampled in row {i}");
                    continue;
                }
                dof += 1;
                let diff = counts[j] as Real - expected;
                chi2 += diff * diff / expected;
            }
            if dof <= 0 {
                continue; // deterministic row
            }
            let critical = ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.99);
            assert!(
                chi2 < critical,
                "row {i}: chi2 {chi2:.2} exceeds the 1% critical value {critical:.2}"
            );
        }
    }

    #[test]
    fn bias_scaling_examples() {
        // lambda = 1 leaves the argmax untouched
        let mut conf = [0.0; ACTION_COUNT];
        conf[AtomicAction::SpinLeg.index()] = 0.9;
        conf[AtomicAction::Reach.index()] = 0.1;
        let (_, label) = apply_confidence_bias(&conf, 1.0).unwrap();
        assert_eq!(label, AtomicAction::SpinLeg);

        // idle 0.6 vs grasp 0.4 at lambda 0.5 flips to grasp
        let mut conf = [0.0; ACTION_COUNT];
        conf[AtomicAction::NoAssemblyAction.index()] = 0.6;
        conf[AtomicAction::HumanGrasp.index()] = 0.4;
        let (adjusted, label) = apply_confidence_bias(&conf, 0.5).unwrap();
        assert!((adjusted[AtomicAction::NoAssemblyAction.index()] - 0.3).abs() < 1e-12);
        assert_eq!(label, AtomicAction::HumanGrasp);

        assert!(apply_confidence_bias(&conf, 0.0).is_err());
        assert!(apply_confidence_bias(&conf, 1.5).is_err());
    }

    #[test]
    fn halving_twice_equals_quartering_once() {
        // label equality over a grid of synthetic confidence vectors
        let mut rng = seeded_rng(7);
        for _ in 0..2000 {
            let mut conf = [0.0; ACTION_COUNT];
            for c in conf.iter_mut() {
                *c = rng.random_range(0.0..1.0);
            }
            let (half, _) = apply_confidence_bias(&conf, 0.5).unwrap();
            let (_, twice) = apply_confidence_bias(&half, 0.5).unwrap();
            let (_, once) = apply_confidence_bias(&conf, 0.25).unwrap();
            assert_eq!(twice, once);
        }
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let m = *paper_model().confusion();
        let mut buf = Vec::new();
        confusion_to_csv(&m, &mut buf).unwrap();
        let back = confusion_from_csv(buf.as_slice()).unwrap();
        for i in 0..ACTION_COUNT {
            for j in 0..ACTION_COUNT {
                assert!((m[i][j] - back[i][j]).abs() < 1e-15);
            }
        }
        // a non-stochastic matrix is rejected
        let text = "no_assembly_action,reach,flip_tabletop,flip_table,spin_leg,align_leg,rotate_table,human_grasp\n\
                    0.5,0,0,0,0,0,0,0\n0,1,0,0,0,0,0,0\n0,0,1,0,0,0,0,0\n0,0,0,1,0,0,0,0\n\
                    0,0,0,0,1,0,0,0\n0,0,0,0,0,1,0,0\n0,0,0,0,0,0,1,0\n0,0,0,0,0,0,0,1\n";
        assert!(confusion_from_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn frame_rate_mismatch_degrades_recall() {
        let cfg = RecognizerConfig {
            frame_rate: 5.0,
            trained_frame_rate: 10.0,
            mismatch_slope: 1.0,
            ..RecognizerConfig::default()
        };
        let m = cfg.build().unwrap();
        let spin = AtomicAction::SpinLeg.index();
        // relative mismatch 0.5 halves recall
        assert!((m.confusion()[spin][spin] - 0.61 * 0.5).abs() < 1e-12);
        // matched rates leave it untouched
        let m0 = RecognizerConfig::default().build().unwrap();
        assert_eq!(m0.confusion()[spin][spin], 0.61);
    }

    proptest! {
        /// Scaling the idle entry can only move the label away from the idle
        /// class, never between two non-idle classes.
        #[test]
        fn bias_never_flips_between_non_idle_labels(
            conf in proptest::array::uniform8(0.0f64..1.0),
            lambda in 0.01f64..1.0,
        ) {
            let (_, before) = apply_confidence_bias(&conf, 1.0).unwrap();
            let (_, after) = apply_confidence_bias(&conf, lambda).unwrap();
            if before != after {
                prop_assert_eq!(before, AtomicAction::NoAssemblyAction);
            }
        }

        /// Exactly one optional prediction per frame, first at window_len.
        #[test]
        fn prediction_cadence(window in 1u64..40) {
            let cfg = RecognizerConfig {
                window_len: window,
                ..RecognizerConfig::default()
            };
            let mut rec = Recognizer::new(cfg.build().unwrap());
            let mut rng = seeded_rng(11);
            for frame in 1..=(window + 20) {
                let out = rec.tick(frame, AtomicAction::Reach, &mut rng).unwrap();
                prop_assert_eq!(out.is_some(), frame >= window);
            }
        }
    }
}
