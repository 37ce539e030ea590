//! Configuration files, checkpoints, CSV output and the commands behind the
//! `cmps` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
