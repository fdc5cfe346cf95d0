//! Experiment configuration, metrics, references, presets and reports.

pub mod config;
pub mod csvio;
pub mod experiment;
pub mod metrics;
pub mod presets;
pub mod reference;
pub mod report;

pub use config::{expand_schedule, ExperimentConfig, ModelId, Problem, SamplerConfig, SamplerKind, ScheduleSpec};
pub use experiment::{run_experiment, Experiment, ReplicationOutcome, RunReport};
pub use metrics::{coupling_bias, fit_convergence_slope, ks_distance, rmse_linf, SlopeFit};
pub use reference::{build_reference, Reference};
