use std::path::PathBuf;

use thiserror::Error;

use crate::model::Violation;
use crate::offline_baseline::OfflineSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {}", join_violations(.0))]
    InvalidInstance(Vec<Violation>),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("instance has no {0} vector")]
    MissingField(&'static str),

    #[error("{what} too large for exhaustive search ({size} > {limit})")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("did not converge: residual {residual:.3e} above tolerance {tolerance:.3e}")]
    NotConverged {
        residual: f64,
        tolerance: f64,
        solution: Box<OfflineSolution>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("could not parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInstance(_)
                | Error::InvalidArgument(_)
                | Error::MissingField(_)
                | Error::TooLarge { .. }
                | Error::Infeasible(_)
                | Error::Parse { .. }
        )
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
