use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes. The CLI maps these onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    UnknownCommand,
    Validation,
    Numerical,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::UnknownCommand => 2,
            ErrorCategory::Validation => 3,
            ErrorCategory::Numerical => 4,
            ErrorCategory::Io => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorCategory::UnknownCommand => "unknown-command",
            ErrorCategory::Validation => "validation",
            ErrorCategory::Numerical => "numerical",
            ErrorCategory::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Precondition violated by an argument (non-positive temperature, site outside the mesh, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid value at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("could not parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("unknown command `{0}`")]
    UnknownCommand(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{what}: root not bracketed in [{lo}, {hi}] (f(lo) = {f_lo:e}, f(hi) = {f_hi:e})")]
    Bracket {
        what: &'static str,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("{what} fit failed: {reason}")]
    FitFailed { what: &'static str, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::UnknownCommand(_) => ErrorCategory::UnknownCommand,
            Error::Domain(_) | Error::Validation { .. } | Error::Parse { .. } => {
                ErrorCategory::Validation
            }
            Error::NoConvergence { .. }
            | Error::Bracket { .. }
            | Error::FitFailed { .. }
            | Error::Numerical(_) => ErrorCategory::Numerical,
            Error::Io { .. } => ErrorCategory::Io,
        }
    }

    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Fails with a validation error unless `value` is finite and strictly positive.
pub(crate) fn ensure_positive(path: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(
            path,
            format!("must be > 0 (got {value})"),
        ))
    }
}

pub(crate) fn ensure_non_negative(path: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation(
            path,
            format!("must be >= 0 (got {value})"),
        ))
    }
}
