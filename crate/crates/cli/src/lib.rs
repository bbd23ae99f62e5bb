//! Command-line front end: configuration, file formats and the three commands.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod presets;

pub use commands::{evaluate, restore, simulate, Overrides};
pub use config::{Preset, RunConfig};
pub use error::{CliError, CliResult};
