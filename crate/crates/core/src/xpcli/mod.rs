//! Experiment harness: scenario files and presets, seeded Monte-Carlo runs,
//! metric aggregation, CSV/JSON output and the `stlab` command line.

pub mod cli;
mod metrics;
mod scenario;
mod trial;

pub use metrics::{
    emit, mean_ci, run_monte_carlo, run_point, sweep_series, symbol_series, to_csv, MetricKind, MetricSeries,
    OutputFormat, MIN_ERRORS_PER_POINT,
};
pub use scenario::{
    load_scenario, parse_scenario, ChannelEstimate, preset, resolve_scenario, Algorithm, DynamicEvent, FieldError, OneOrMany,
    ScenarioConfig, ScenarioError, PRESET_NU, PRESETS,
};
pub use trial::{first_block_model, BlockModel, run_trial, run_trial_with, RunError, StepError, Trace, TrialOutcome, TrialPoint};
