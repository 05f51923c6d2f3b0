//! Batch runs of the occupation-measure LP pipeline: validate, solve,
//! extract a policy, simulate it and compare against the band oracle.

pub mod config;
pub mod error;
pub mod run;

pub use config::{Form, Mode, Range, RunConfig};
pub use error::CliError;
pub use run::{agree, resolve_problem, run, Check, Outcome, Problem};
