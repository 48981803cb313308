//! Filesystem, parallel exploration and command-line layer over
//! [`flowdse_core`].

use std::fmt::Display;
use std::path::{Path, PathBuf};

pub use flowdse_core as core;

pub mod cli;
pub mod explorer;
pub mod io;

/// Errors surfaced to the command line, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    Output { path: PathBuf, message: String },
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub fn input(path: &Path, e: impl Display) -> Self {
        Error::Input { path: path.to_path_buf(), message: e.to_string() }
    }

    pub fn invalid(path: &Path, e: impl Display) -> Self {
        Error::Input { path: path.to_path_buf(), message: e.to_string() }
    }

    pub fn output(path: &Path, e: impl Display) -> Self {
        Error::Output { path: path.to_path_buf(), message: e.to_string() }
    }

    /// 2 usage, 3 invalid input, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Input { .. } | Error::Invalid(_) => 3,
            Error::Output { .. } | Error::Runtime(_) => 4,
        }
    }
}
