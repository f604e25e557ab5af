//! Metrics and statistics: per-cycle timing and fluency, success-rate
//! decomposition, repetition decay, the Wilcoxon signed-rank test, Likert
//! scoring and Cronbach's alpha, plus the closed-form calibration oracles.

mod calibration;
mod likert;
mod metrics;
mod stats;

pub use calibration::{
    analytic_cycle_rate, detection_success_probability, detection_wait_stats, p_retry_for_target,
};
pub use likert::{
    likert_from_csv, score_likert, LikertItem, LikertMatrix, LikertResponse, LIKERT_ITEM_COUNT,
};
pub use metrics::{
    compute_cycle_metrics, read_metrics_csv, success_rates, success_rates_from_traces, summarize,
    write_metrics_csv, CycleMetrics, EpisodeSummary, MetricsRow, RateCount, SuccessRates,
};
pub use stats::{
    cronbach_alpha, repetition_decay, required_cycle_rate, wilcoxon_signed_rank, CronbachResult,
    WilcoxonMethod, WilcoxonResult,
};
