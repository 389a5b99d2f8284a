//! Pipeline plumbing behind the `estc` binary: configuration, reports,
//! run manifests and resume.

pub mod config;
pub mod pipeline;
pub mod report;

use std::process::ExitCode;

pub use config::{ModelChoice, ObserveConfig, RunConfig, Tolerances};
pub use pipeline::{resume, run_pipeline, Manifest, ResumeOutcome};

/// Invalid configuration or arguments (exit code 4).
#[derive(Debug, thiserror::Error)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

/// A verification maximum exceeded its tolerance (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("verification failed: {0}")]
pub struct VerificationFailed(pub String);

/// An artifact does not match the digest recorded in the manifest (exit code 1).
#[derive(Debug, thiserror::Error)]
#[error("digest mismatch for {file}: manifest has {expected}, file has {actual}")]
pub struct DigestMismatch {
    pub file: String,
    pub expected: String,
    pub actual: String,
}

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_VERIFICATION: u8 = 2;
pub const EXIT_RANK_DEFICIENT: u8 = 3;
pub const EXIT_CONFIG: u8 = 4;

/// Maps an error chain to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> ExitCode {
    for cause in err.chain() {
        if cause.is::<VerificationFailed>() {
            return ExitCode::from(EXIT_VERIFICATION);
        }
        if cause.is::<ConfigError>() {
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Some(e) = cause.downcast_ref::<estc_core::Error>() {
            match e {
                estc_core::Error::RankDeficiency { .. } => return ExitCode::from(EXIT_RANK_DEFICIENT),
                estc_core::Error::Config(_) => return ExitCode::from(EXIT_CONFIG),
                _ => {}
            }
        }
    }
    ExitCode::from(EXIT_FAILURE)
}
