//! Experiment configuration files, run manifests and the commands behind the
//! `csgl-amp` binary.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod selftest;

pub use commands::{cmd_calibrate, cmd_region, cmd_sweep, RunError};
pub use config::{load_config, parse_config, serialize_config, ConfigError};
pub use manifest::RunManifest;
