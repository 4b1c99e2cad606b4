//! Benchmark harness around the co-simulation masters: run configuration,
//! reference caching, error metrics, CSV output and comparison tables.

pub mod cache;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod runner;

pub use config::{FileConfig, Method, RunConfig};
pub use csv_io::{emit_csv, read_csv};
pub use error::CliError;
pub use runner::{compare, run, CompareRow, CompareTable, RunOutcome, RunSummary};
