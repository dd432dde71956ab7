//! Configuration, orchestration and file output for the `mixfbm` command.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command};
pub use config::RunConfig;
pub use error::{CliError, Result};
pub use output::{Manifest, MANIFEST_FILE};
