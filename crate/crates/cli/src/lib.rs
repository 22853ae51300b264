//! Library surface of the command line runner; `main` is a thin argument
//! parser over these functions so tests can drive them directly.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::CmdError;
pub use config::{load_config, LoadedConfig, RunConfig};
