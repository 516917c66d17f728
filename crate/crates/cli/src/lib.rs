//! Library side of the `htq` command: config schema, the parsers exposed to
//! fuzzing, command implementations and plotting.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod validate;

pub use config::{parse_config, parse_distribution};
pub use error::{CliError, Result};
pub use plot::parse_plot_csv;
