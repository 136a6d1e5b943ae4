use std::fmt;
use std::path::Path;

use dfunet::features::FeatureError;
use dfunet::metrics::MetricsError;
use dfunet::netzoo::{CheckpointError, NetError};
use dfunet::optim::OptimError;
use dfunet::pipeline::PipelineError;
use dfunet::svm::SvmError;

/// Exit code for bad input, unreadable files and malformed formats.
pub const EXIT_INPUT: u8 = 2;
/// Exit code for numeric failures such as a non-finite training loss.
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::input(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

macro_rules! input_errors {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::input(e.to_string())
            }
        })*
    };
}

input_errors!(
    PipelineError,
    FeatureError,
    MetricsError,
    CheckpointError,
    NetError,
    serde_json::Error
);

impl From<SvmError> for CliError {
    fn from(e: SvmError) -> Self {
        CliError::input(format!("svm: {e}"))
    }
}

impl From<OptimError> for CliError {
    fn from(e: OptimError) -> Self {
        let code = match e {
            OptimError::NonFiniteLoss { .. } => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
