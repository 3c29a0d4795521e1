//! Dataset IO, configuration and reporting around `dbacs-core`, plus the
//! stages behind the `dbacs` command-line tool.

pub mod commands;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod layout;
pub mod report;
pub mod svg;

pub use config::{Overrides, RunConfig};
pub use error::{ToolError, ToolResult};
pub use layout::{ModelKind, RunDir};
