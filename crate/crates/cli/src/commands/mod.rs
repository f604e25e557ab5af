pub mod metrics;
pub mod report;
pub mod simulate;
pub mod stats;
