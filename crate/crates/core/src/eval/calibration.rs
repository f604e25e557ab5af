//! Closed-form calibration oracles for the stochastic channels.
//!
//! These are the analytic counterparts of the simulated quantities: the
//! per-cycle success model and the consecutive-detection waiting-time
//! distribution. Tests hold the simulation against them; the report command
//! prints both sides.

use crate::error::{Error, Result};
use crate::Real;

/// Per-cycle success under the retry model: the grasp must succeed, then the
/// handover succeeds on the first attempt or, after one retry (probability
/// `p_retry`), on the second: `g * (h + (1 - h) * p_retry * h)`.
pub fn analytic_cycle_rate(grasp: Real, handover: Real, p_retry: Real) -> Real {
    grasp * (handover + (1.0 - handover) * p_retry * handover)
}

/// Retry probability that makes [`analytic_cycle_rate`] hit `target_cycle`.
pub fn p_retry_for_target(grasp: Real, handover: Real, target_cycle: Real) -> Result<Real> {
    if !(grasp > 0.0) || !(handover > 0.0) || handover >= 1.0 {
        return Err(Error::config(
            "p_retry_for_target requires grasp > 0 and handover in (0,1)",
        ));
    }
    let p = (target_cycle / grasp - handover) / ((1.0 - handover) * handover);
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!(
            "target cycle rate {target_cycle} is not reachable with grasp {grasp} and handover {handover} (p_retry {p})"
        )));
    }
    Ok(p)
}

/// Distribution of the tick at which a run of two consecutive detections
/// completes, for i.i.d. per-tick detection probability `q` over a window of
/// `window_ticks` draws (draw 0 is the hand-closure tick). Returns
/// `f[m] = P(release completes exactly at draw m)` for `m in 1..window_ticks`.
fn release_distribution(q: Real, window_ticks: u32) -> Vec<Real> {
    let n = window_ticks as usize;
    let mut f = vec![0.0; n];
    // state: probability of being unreleased with a current run of 0 or 1
    let (mut p0, mut p1) = (1.0, 0.0);
    for m in 0..n {
        if m > 0 {
            f[m] = p1 * q;
        }
        let np0 = (p0 + p1) * (1.0 - q);
        let np1 = p0 * q + if m == 0 { p1 * q } else { 0.0 };
        p0 = np0;
        p1 = np1;
    }
    f
}

/// Probability that two consecutive detections occur within the window.
pub fn detection_success_probability(q: Real, window_ticks: u32) -> Real {
    release_distribution(q, window_ticks).iter().sum()
}

/// Mean and standard deviation of the release tick, conditional on release
/// within the window. `None` when release is impossible.
pub fn detection_wait_stats(q: Real, window_ticks: u32) -> Option<(Real, Real)> {
    let f = release_distribution(q, window_ticks);
    let total: Real = f.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mean: Real = f
        .iter()
        .enumerate()
        .map(|(m, p)| m as Real * p)
        .sum::<Real>()
        / total;
    let var: Real = f
        .iter()
        .enumerate()
        .map(|(m, p)| (m as Real - mean).powi(2) * p)
        .sum::<Real>()
        / total;
    Some((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_rate_closed_form_matches_hand_derivation() {
        // 0.96 * (0.851 + 0.149 * 0.68 * 0.851) = 0.89973...
        let rate = analytic_cycle_rate(0.96, 0.851, 0.68);
        assert!((rate - 0.899734).abs() < 1e-6, "rate {rate}");
        // the default p_retry of 0.68 comes from inverting the model at 0.90
        let p = p_retry_for_target(0.96, 0.851, 0.90).unwrap();
        assert!((p - 0.68218).abs() < 1e-5, "p_retry {p}");
        assert!((analytic_cycle_rate(0.96, 0.851, p) - 0.90).abs() < 1e-12);
        assert!(p_retry_for_target(0.96, 0.851, 0.99).is_err());
    }

    #[test]
    fn detection_dp_matches_the_chosen_defaults() {
        // the default 7.5 s timeout is 75 draws at 10 Hz
        let h = detection_success_probability(0.17, 75);
        assert!((h - 0.84975).abs() < 5e-5, "h {h}");
        let (mean, sd) = detection_wait_stats(0.17, 75).unwrap();
        assert!((mean - 26.377).abs() < 0.01, "mean {mean}");
        assert!((sd - 19.644).abs() < 0.01, "sd {sd}");
    }

    #[test]
    fn detection_dp_agrees_with_monte_carlo() {
        use rand::Rng;
        let mut rng = crate::rng::seeded_rng(123);
        let (q, window) = (0.17, 75u32);
        let runs = 200_000;
        let mut released = 0u32;
        let mut wait_sum = 0.0;
        for _ in 0..runs {
            let mut run = 0;
            for m in 0..window {
                if rng.random_range(0.0..1.0) < q {
                    run += 1;
                    if run >= 2 && m > 0 {
                        released += 1;
                        wait_sum += m as Real;
                        break;
                    }
                } else {
                    run = 0;
                }
            }
        }
        let h_mc = released as Real / runs as Real;
        let h_dp = detection_success_probability(q, window);
        assert!((h_mc - h_dp).abs() < 0.005, "MC {h_mc} vs DP {h_dp}");
        let mean_mc = wait_sum / released as Real;
        let (mean_dp, _) = detection_wait_stats(q, window).unwrap();
        assert!((mean_mc - mean_dp).abs() < 0.2, "MC {mean_mc} vs DP {mean_dp}");
    }

    #[test]
    fn certain_detection_releases_at_the_second_tick() {
        let f = release_distribution(1.0, 10);
        assert!((f[1] - 1.0).abs() < 1e-12);
        assert!(f[2..].iter().all(|&p| p == 0.0));
        assert_eq!(detection_wait_stats(0.0, 10), None);
    }
}
