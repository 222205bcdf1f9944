//! Experiment configs, sweeps over (N_avg, m, N_osc) and result emission.

mod config;
mod plot;
mod runner;
mod table;

pub use config::{ExperimentConfig, IntegratorSettings, SweepSpec, TargetSpec};
pub use plot::emit_plot_data;
pub use runner::{
    missing_manifest_files, run_endpoint_experiment, run_trajectory_experiment, ExperimentInputs,
    ExperimentOutcome, Manifest, RowManifest, RunOptions, MANIFEST_FILE, RESULTS_FILE,
};
pub use table::{row_key, strip_wall_clock, ResultRow, ResultTable, RowStatus, RESULTS_HEADER};
