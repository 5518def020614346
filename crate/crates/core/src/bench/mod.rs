//! Experiment harness behind the `rgd-bench` binary.

pub mod config;
pub mod dataset;
pub mod runner;
pub mod validate;

pub use config::{ExperimentConfig, ExperimentKind, MethodConfig, MethodKind, NoiseConfig, TaskConfig};
pub use dataset::{balanced_subsample, load_csv_dataset, DatasetFile, DatasetSchema, Split};
pub use runner::{read_results, run_experiment, RunOptions, RunSummary, CSV_COLUMNS};
pub use validate::{run_validation_suite, ValidationReport};
