//! Configuration, execution and output for the `perfed` command.

pub mod error;
pub mod output;
pub mod run;
pub mod spec;

pub use error::CliError;
pub use spec::{load_run_spec, parse_run_spec, Profile, RunSpec};
