//! Experiment driver: typed configs, image metrics, corpus runs and their
//! CSV/PPM artifacts.

pub mod config;
pub mod corpus;
pub mod experiment;
pub mod metrics;

pub use config::{ConfigError, ExperimentConfig, SceneSpec, TrajectorySpec};
pub use experiment::{compare_results, run_experiment, run_experiment_with, write_outputs, ComparisonRow, ExperimentResult, FrameOracle};
pub use metrics::{psnr, MetricsRow};
