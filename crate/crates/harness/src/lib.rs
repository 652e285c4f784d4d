//! Config-driven experiment runner for the `cpdsym` integrators.
//!
//! Each experiment writes UTF-8 CSV files with LF line endings and a
//! `metadata.json` into its output directory. CSV bytes depend only on the
//! config, not on the worker count.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod runner;

pub use config::{parse_config, ExperimentConfig, ExperimentKind};
pub use error::{HarnessError, Result};
pub use presets::{preset, PRESET_NAMES};
pub use runner::{compute, run_experiment, Outputs, RunMetadata, RunReport};
