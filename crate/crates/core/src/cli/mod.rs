//! Front end of the `gauss-match` binary: config ingestion, sample I/O and
//! command dispatch producing versioned JSON result documents.
//!
//! Exit codes: 0 success, 1 domain error (or a failed oracle check), 2 usage error.

pub mod config;
pub mod io;
pub mod run;

pub use config::{parse_config, Command, RunConfig};
pub use io::{read_sample, write_sample};
pub use run::{main, main_from, run, Cli, Report, SCHEMA};
