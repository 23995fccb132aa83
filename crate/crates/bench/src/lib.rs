//! Host-side companion to `coreset-core`: dataset and results files, run
//! directories, parallel sweeps and the `coreset-bench` command line.

pub mod cli;
mod error;
pub mod io;
pub mod sweep;

pub use error::{BenchError, Result};
pub use io::{load_csv, read_results, save_csv, write_results, ResultFormat};
pub use sweep::{resolve_dataset, run_sweep, MonotonicClock, SweepConfig, SweepOutcome};
