//! Command-line front end for the demonsim engine: parameter sweeps,
//! fluctuation-theorem checks, single-point reports and raw trajectory dumps.

pub mod app;
pub mod config;
pub mod error;
pub mod output;
pub mod sweep;

pub use config::{EngineMode, ErrorAxis, OutputFormat, ProtocolName, ProtocolSpec, SweepConfig};
pub use error::{CliError, ConfigError};
pub use sweep::{run_sweep, McColumns, SweepRow, SweepTable};
