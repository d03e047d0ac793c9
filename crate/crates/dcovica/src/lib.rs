//! File formats, command-line front end and simulation harness for
//! [`dcovica_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod manifest;
pub mod report;

pub use error::{CliError, CliResult};
