//! Experiment harness for `hsr-ici`: TOML configuration, CSV output, the
//! position sweeps, result tables, ASQ curves and the oracle verification
//! suite behind the `hsr-ici` binary.

pub mod config;
pub mod experiments;
pub mod output;
pub mod verify;

pub use config::{ConfigError, SimConfig};
pub use experiments::{Algorithm, Context, ExperimentError};
pub use output::{ExperimentResult, Value};
