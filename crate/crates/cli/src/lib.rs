//! Library surface of the chaosmeter CLI: configuration, sweep
//! orchestration, and file emission, kept callable so integration and
//! acceptance tests drive the same code paths as the binary.

pub mod config;
pub mod error;
pub mod output;
pub mod sweep;

pub use config::{Model, SweepConfig};
pub use error::{CliError, Result};
