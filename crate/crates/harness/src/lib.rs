//! Command-line runs, input generators, the power-iteration baseline and
//! run records for `shiftinvert`.

pub mod baseline;
pub mod bench;
pub mod cli;
pub mod error;
pub mod generator;
pub mod pool;
pub mod record;
pub mod run;
pub mod spec;
pub mod trace;

pub use cli::cli_main;
pub use error::{HarnessError, Result};
pub use generator::Generator;
pub use record::{Payload, RunRecord};
pub use run::execute;
pub use spec::{Input, Mode, RunSpec};
