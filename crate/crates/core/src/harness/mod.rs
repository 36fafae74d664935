//! Synthetic instances, parameter sweeps and self-verification suites.

pub mod config;
pub mod generator;
pub mod sweep;
#[cfg(feature = "oracle")]
pub mod verify;

pub use config::ExperimentConfig;
pub use generator::{generate_instance, trial_seed, CtrMixture, GeneratorConfig};
pub use sweep::{run_sweep, run_sweep_to_path, SweepConfig, SweepSummary};
