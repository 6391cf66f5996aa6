//! Config-driven front end for the exoshape toolkit.

pub mod commands;
pub mod config;
pub mod error;
pub mod gains;
pub mod summary;

pub use config::{load_config, parse_config, Loaded, ProjectConfig};
pub use error::CliError;

pub const TOOL_VERSION: &str = concat!("exoshape ", env!("CARGO_PKG_VERSION"));
