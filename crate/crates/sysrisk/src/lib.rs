//! Std companion of `sysrisk-core`: TOML experiment configs, CSV artifacts
//! written atomically, a rayon replication runner and the subcommands behind
//! the `sysrisk` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod runner;

use std::path::PathBuf;

/// Failures of the std layer, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {msg}")]
    Input { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Core(#[from] sysrisk_core::Error),
    #[error("replication {replication} (master seed {seed}) failed: {source}")]
    Replication {
        replication: usize,
        seed: u64,
        #[source]
        source: sysrisk_core::Error,
    },
}

impl Error {
    /// 2 for configuration and input errors, 3 for numeric failures, 1 for IO.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Input { .. } => 2,
            Error::Io { .. } | Error::Csv { .. } => 1,
            Error::Core(e) | Error::Replication { source: e, .. } => {
                if e.is_numeric() {
                    3
                } else {
                    2
                }
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
