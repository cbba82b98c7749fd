//! Library half of the `timemachine` command: config parsing, scenario
//! runs, record export and the invariant checks behind `verify`.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod export;
pub mod record;
pub mod scenario;
pub mod verify;

use timemachine_core::Error as EngineError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("engine error: {0}")]
    Engine(#[from] EngineError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("malformed record {path}: {message}")]
    Record { path: String, message: String },
    #[error("{0} check(s) failed")]
    Verify(usize),
}

impl CliError {
    /// 1: bad input or IO, 2: numerical failure, 3: failed checks.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Engine(e) => engine_code(e),
            CliError::Verify(_) => 3,
            _ => 1,
        }
    }
}

fn engine_code(e: &EngineError) -> u8 {
    match e {
        EngineError::InvalidParameter { .. } | EngineError::NonHermitian | EngineError::EmptyEnsemble => 1,
        EngineError::Member { source, .. } => engine_code(source),
        _ => 2,
    }
}

pub(crate) fn io_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}
