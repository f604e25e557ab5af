//! Nonparametric statistics kernels, generic over the scalar type.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probability of `n` consecutive successes: `p_cycle^n`.
pub fn repetition_decay<T: Scalar>(p_cycle: T, n: u32) -> Result<T> {
    validate_probability(p_cycle, "p_cycle")?;
    validate_n(n)?;
    Ok(p_cycle.powi(n as i32))
}

/// Per-cycle rate needed for a target full-task rate: `p_full^(1/n)`.
pub fn required_cycle_rate<T: Scalar>(p_full: T, n: u32) -> Result<T> {
    validate_probability(p_full, "p_full")?;
    validate_n(n)?;
    Ok(p_full.powf(T::one() / T::from_u32(n).unwrap()))
}

fn validate_probability<T: Scalar>(p: T, name: &str) -> Result<()> {
    if p < T::zero() || p > T::one() || !p.is_finite() {
        return Err(Error::config(format!(
            "{name} must lie in [0,1], got {p:?}"
        )));
    }
    Ok(())
}

fn validate_n(n: u32) -> Result<()> {
    if n < 1 {
        return Err(Error::config("n must be at least 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
    /// All differences were zero; no test statistic exists.
    Undefined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of the ranks of positive differences.
    pub w_plus: f64,
    /// Pairs remaining after zero differences are dropped.
    pub n_effective: usize,
    /// Two-sided p, `None` for all-tied data.
    pub p_two_sided: Option<f64>,
    pub method: WilcoxonMethod,
}

/// Paired Wilcoxon signed-rank test on `(a, b)` pairs.
///
/// Differences `a - b` of zero are dropped; absolute differences are ranked
/// with mid-ranks for ties. The exact two-sided p enumerates the full sign
/// distribution for up to 20 effective pairs (computed by subset-sum
/// recursion, identical to enumerating all `2^n` assignments); larger
/// samples use the normal approximation with tie-corrected variance and a
/// 0.5 continuity correction. p is clamped to (0, 1].
pub fn wilcoxon_signed_rank<T: Scalar>(pairs: &[(T, T)]) -> Result<WilcoxonResult> {
    if pairs.is_empty() {
        return Err(Error::config("wilcoxon requires at least one pair"));
    }
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|&(a, b)| (a - b).to_f64_lossy())
        .inspect(|d| debug_assert!(d.is_finite()))
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            w_plus: 0.0,
            n_effective: 0,
            p_two_sided: None,
            method: WilcoxonMethod::Undefined,
        });
    }

    // mid-ranks over |d|, doubled so rank sums stay on an integer lattice
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().partial_cmp(&diffs[j].abs()).unwrap());
    let mut ranks2 = vec![0u64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        // ranks i+1 ..= j+1 share the mid-rank; doubled it is (i+j+2)
        let rank2 = (i + j + 2) as u64;
        for &idx in &order[i..=j] {
            ranks2[idx] = rank2;
        }
        i = j + 1;
    }
    let w2_plus: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let w_plus = w2_plus as f64 / 2.0;

    let (p, method) = if n <= 20 {
        let total: u64 = ranks2.iter().sum();
        let mut counts = vec![0u64; total as usize + 1];
        counts[0] = 1;
        for &r in &ranks2 {
            for s in (r as usize..counts.len()).rev() {
                counts[s] += counts[s - r as usize];
            }
        }
        let all = (1u64) << n;
        let le: u64 = counts[..=w2_plus as usize].iter().sum();
        let ge: u64 = counts[w2_plus as usize..].iter().sum();
        let p = 2.0 * (le.min(ge) as f64) / all as f64;
        (p.min(1.0), WilcoxonMethod::Exact)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        // tie correction: sum of (t^3 - t) over groups of equal |d|
        let mut tie_term = 0.0;
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let sd = var.sqrt();
        let centred = w_plus - mean;
        let z = (centred - 0.5 * centred.signum()) / sd;
        let normal = Normal::new(0.0, 1.0).unwrap();
        let p = 2.0 * (1.0 - normal.cdf(z.abs()));
        (p.min(1.0), WilcoxonMethod::NormalApprox)
    };

    Ok(WilcoxonResult {
        w_plus,
        n_effective: n,
        p_two_sided: Some(p.max(f64::MIN_POSITIVE)),
        method,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CronbachResult {
    /// `None` when the total-score variance is zero.
    pub alpha: Option<f64>,
    /// Alpha recomputed with each item removed, in item order.
    pub alpha_if_deleted: Vec<Option<f64>>,
}

/// Cronbach's alpha over a participants x items matrix (rows are
/// participants). Sample variances use the n-1 denominator.
pub fn cronbach_alpha<T: Scalar>(rows: &[Vec<T>]) -> Result<CronbachResult> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::config("cronbach requires at least 2 participants"));
    }
    let k = rows[0].len();
    if k < 2 {
        return Err(Error::config("cronbach requires at least 2 items"));
    }
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::config("ratings matrix is ragged"));
    }
    let data: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().map(|v| v.to_f64_lossy()).collect())
        .collect();

    let alpha_of = |items: &[usize]| -> Option<f64> {
        let k = items.len() as f64;
        let item_var_sum: f64 = items
            .iter()
            .map(|&j| sample_variance(data.iter().map(|row| row[j])))
            .sum();
        let total_var =
            sample_variance(data.iter().map(|row| items.iter().map(|&j| row[j]).sum()));
        if total_var == 0.0 {
            return None;
        }
        Some(k / (k - 1.0) * (1.0 - item_var_sum / total_var))
    };

    let all: Vec<usize> = (0..k).collect();
    let alpha = alpha_of(&all);
    let alpha_if_deleted = (0..k)
        .map(|drop| {
            if k == 2 {
                return None; // one item left: alpha is undefined
            }
            let kept: Vec<usize> = (0..k).filter(|&j| j != drop).collect();
            alpha_of(&kept)
        })
        .collect();
    Ok(CronbachResult {
        alpha,
        alpha_if_deleted,
    })
}

fn sample_variance(values: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}
