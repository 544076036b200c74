//! Command-line front end for the adversarial car-following simulator.
//!
//! Subcommands train the two players by self-play, replay a checkpoint,
//! run the static-fusion baseline, solve the stage game, and plot traces.
//! Every run writes into its own output directory.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod summary;
pub mod trace;

pub use error::{CliError, Result};
