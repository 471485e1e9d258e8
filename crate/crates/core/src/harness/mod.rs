//! Experiment configs, sequence generators, artifacts and the acceptance
//! suite behind the CLI.

pub mod config;
pub mod generate;
pub mod run;
pub mod verify;

pub use config::{ExperimentConfig, ForecasterConfig, GeneratorConfig, OutputConfig, OutputFormat};
pub use generate::{generate_sequence, load_sequence, save_sequence, Sequence};
pub use run::{run_experiment, simulate, ArtifactBundle, Summary};
pub use verify::{all_passed, broken_relaxation_check, criterion, render, verify_suite, CheckResult, Level};
