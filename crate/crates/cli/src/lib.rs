//! Batch front end: configuration, orchestration and serialization for
//! `spillover run`.

pub mod config;
pub mod error;
pub mod export;
pub mod run;

pub use config::{Cli, Command, RunArgs, RunConfig};
pub use error::{RunError, Stage};
pub use run::{run, Outcome};
