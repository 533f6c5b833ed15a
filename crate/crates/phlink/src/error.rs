//! Error classes of the command-line surface.
//!
//! Every failure is reported on stderr as `error[<class>]: <message>`
//! and mapped to a fixed exit code, so scripts can dispatch on the
//! class without parsing the message:
//!
//! | class        | exit code | meaning                                      |
//! |--------------|-----------|----------------------------------------------|
//! | `config`     | 2         | configuration file or flag rejected          |
//! | `io`         | 3         | filesystem failure                           |
//! | `data`       | 4         | an input file parsed but its contents are unusable |
//! | `estimation` | 5         | parameter estimation failed on valid inputs  |

use crate::io::TraceFileError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Estimation(String),
}

impl CliError {
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Data(_) => "data",
            CliError::Estimation(_) => "estimation",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Data(_) => 4,
            CliError::Estimation(_) => 5,
        }
    }
}

impl From<phlink_core::Error> for CliError {
    fn from(e: phlink_core::Error) -> Self {
        use phlink_core::Error::*;
        match &e {
            InvalidParams(_) | InvalidConfig(_) => CliError::Config(e.to_string()),
            Unidentifiable(_) | ThresholdUndefined | NonFinite(_) | EstimationFailed(_) => {
                CliError::Estimation(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TraceFileError> for CliError {
    fn from(e: TraceFileError) -> Self {
        match &e {
            TraceFileError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
