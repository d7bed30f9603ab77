//! Command-line front end: stage operations, the pipeline runner and the
//! argument parser.

pub mod cli;
pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod stages;

use std::path::PathBuf;

use pipeline::Stage;

/// Invalid or unreadable configuration. Maps to exit code 2.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

/// An upstream artifact a stage reads is absent.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("missing {}: run the `{producer}` stage first", path.display())]
pub struct MissingArtifact {
    pub path: PathBuf,
    pub producer: Stage,
}

/// Every upstream artifact missing for a planned run.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct MissingArtifacts(pub Vec<MissingArtifact>);

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Exit code for an error returned by a command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.downcast_ref::<ConfigError>().is_some()) {
        EXIT_CONFIG
    } else {
        EXIT_FAILURE
    }
}
