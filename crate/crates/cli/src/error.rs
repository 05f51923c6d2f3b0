use std::path::PathBuf;

use singular_lp::discretize::DiscretizeError;
use singular_lp::model::ModelError;
use singular_lp::policy::PolicyError;
use singular_lp::simplex::{MpsError, SimplexError};
use singular_lp::verify::VerifyError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_UNBOUNDED: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;
pub const EXIT_NUMERICAL: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("standing conditions fail: {0}")]
    Validation(String),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error("LP is infeasible, certificate written to {}", .0.display())]
    Infeasible(PathBuf),
    #[error("LP is unbounded")]
    Unbounded,
    #[error("simplex hit the iteration limit after {0} pivots")]
    IterLimit(usize),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Mps(#[from] MpsError),
    #[error("re-exported MPS differs from the original")]
    MpsRoundTrip,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Unbounded => EXIT_UNBOUNDED,
            CliError::Config(_)
            | CliError::Io { .. }
            | CliError::Model(_)
            | CliError::Validation(_)
            | CliError::Discretize(_)
            | CliError::Simplex(SimplexError::Tolerance(_)) => EXIT_VALIDATION,
            CliError::Verify(e) => match e {
                VerifyError::Truncation { .. } | VerifyError::Policy(_) => EXIT_NUMERICAL,
                _ => EXIT_VALIDATION,
            },
            CliError::IterLimit(_) | CliError::Simplex(_) | CliError::Policy(_) | CliError::Mps(_) | CliError::MpsRoundTrip => {
                EXIT_NUMERICAL
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Model(_) => "model",
            CliError::Validation(_) => "validation",
            CliError::Discretize(_) => "discretize",
            CliError::Infeasible(_) => "infeasible",
            CliError::Unbounded => "unbounded",
            CliError::IterLimit(_) => "iteration_limit",
            CliError::Simplex(_) => "simplex",
            CliError::Policy(_) => "policy",
            CliError::Verify(_) => "verify",
            CliError::Mps(_) | CliError::MpsRoundTrip => "mps",
        }
    }

    /// `error code=<n> kind=<kind> message="<json-escaped text>"`
    pub fn line(&self) -> String {
        let message = serde_json::to_string(&self.to_string()).expect("strings serialize");
        format!("error code={} kind={} message={}", self.exit_code(), self.kind(), message)
    }
}

pub(crate) fn io_error(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
