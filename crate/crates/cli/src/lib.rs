//! Stage functions behind the `concept-bench` command line tool.

pub mod config;
pub mod stages;

pub use config::RunConfig;
