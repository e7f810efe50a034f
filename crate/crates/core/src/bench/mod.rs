//! Experiment harness: config parsing, seeded multi-run training, and the
//! CSV/SVG/meta artifacts written by `snlls-bench`.

mod cli;
pub mod config;
pub mod output;
pub mod runner;
#[cfg(feature = "oracle")]
pub mod selftest;

pub use cli::cli_main;
pub use config::{DatasetSpec, EpochLoss, ExperimentConfig, HyperOverrides, OptimizerSpec};
pub use output::{render_svg_plot, write_artifacts, write_csv};
pub use runner::{run_experiment, run_on_dataset, ExperimentResult, LossTrace, TraceMeta};
