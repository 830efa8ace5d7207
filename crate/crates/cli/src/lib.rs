//! Configuration, run modes and artifact output for the `steklov` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, Initial, Mode, RunConfig};
pub use run::{execute, load_shape, reevaluate, run, write_artifacts, LoadedShape, RunError, RunResult};
