//! File formats, exports, benchmark sweeps and the `ctiv` command line on top
//! of `ctiv-core`.

pub mod cli;
pub mod error;
pub mod export;
pub mod io;
pub mod report;
pub mod sweep;

pub use error::{CliError, Result};
