//! Experiment harness and output formatting behind the `causalfair` binary.

pub mod harness;
pub mod output;

pub use harness::{
    probe_max_feasible_k, run_estimator_accuracy, run_tradeoff, DataSource, EstimatorSeRow,
    MetricsRow, TradeoffOutput,
};
