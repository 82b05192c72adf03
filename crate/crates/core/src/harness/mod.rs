pub mod config;
pub mod experiment;
pub mod fit;

pub use config::{hypothesis_check, ExperimentConfig, ExperimentKind, HypothesisCheck, InitialData, Overrides};
pub use experiment::{run_experiment, run_experiment_with_data, Check, Manifest};
pub use fit::{fit_power_law, FitResult};
