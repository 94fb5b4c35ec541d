//! Offline evaluation and the latency harness.

mod compare;
mod latency;
mod metrics;

pub use compare::{compare_models, ComparisonRow, ComparisonTable};
pub use latency::{
    machine_descriptor, measure_fn, measure_latency, percentile, LatencyReport, MIN_SAMPLES,
};
pub use metrics::{evaluate, ClassScores, EvalReport};
