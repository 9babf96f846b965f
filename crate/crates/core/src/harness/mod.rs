//! Scenario configuration, pipeline orchestration, batch runs, and
//! plottable exports.

pub mod batch;
pub mod config;
pub mod pipeline;

pub use batch::{median_ratio, run_batch, summarize, BatchOutcome, BatchRun};
pub use config::{
    ninebus_family, sixtyeightbus_family, AttackConfig, FaultConfig, FilterConfig, MachineConfig,
    NetworkConfig, NoiseConfig, ScenarioConfig, SimConfig,
};
pub use pipeline::{
    emit_plots_data, run_filter, run_pipeline, series_indices, write_artifact, FilterKind,
    FilterOutcome, FilterRun, FilterRunResult, FilterSelection, ReplicaFeedback, RunArtifact,
    TrajectoryRow,
};
