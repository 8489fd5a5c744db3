//! Experiment orchestration: manifests, Monte Carlo drivers and result files.

pub mod config;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, OutputFormat, OutputKind, Overrides, StrategyConfig, StrategyId, ThetaSource};
pub use output::{emit_results, format_sig9, render};
pub use run::{
    run_experiment, run_multi_user, run_single_user, simulate_multi_user, simulate_single_user, AggregateStats, CurvePoint, Estimate,
    MultiRunRecord, Occupancy, SingleRunRecord, Summary,
};
