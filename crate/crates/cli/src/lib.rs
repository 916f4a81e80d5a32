//! Command-line front end for the caption-to-knowledge-graph toolkit.

pub mod commands;
pub mod pipeline;
pub mod query;

use std::fmt;

/// Process exit status for a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Usage = 1,
    Data = 2,
    Internal = 3,
}

/// Misuse of the command line that clap cannot catch on its own.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Bad input detected by the front end itself, such as an invalid run
/// configuration.
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

/// Usage errors map to 1, problems with input data or files to 2, and
/// anything else to 3.
pub fn classify(err: &anyhow::Error) -> ExitStatus {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<query::PatternError>() {
            return ExitStatus::Usage;
        }
        if cause.is::<DataError>()
            || cause.is::<vid2kg_core::Error>()
            || cause.is::<std::io::Error>()
            || cause.is::<serde_json::Error>()
            || cause.is::<toml::de::Error>()
        {
            return ExitStatus::Data;
        }
    }
    ExitStatus::Internal
}
