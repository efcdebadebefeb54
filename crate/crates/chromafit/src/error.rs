use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors split into two families: bad input (files, shapes, arguments) and
/// numerical failure (rank deficiency, infeasibility, stalled iterations).
/// The CLI maps the former to exit code 2 and the latter to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("wavelength grids differ: {0}")]
    GridMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid spectral data: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: row {row}, column `{column}`: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("rank-deficient system (condition number {cond:.3e}): {context}")]
    RankDeficient { cond: f64, context: String },

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("unbounded linear program: {0}")]
    Unbounded(String),

    #[error("no convergence within {limit} iterations: {context}")]
    NoConvergence { limit: usize, context: String },

    #[error("non-finite value at iteration {iteration}: {context}")]
    NonFinite { iteration: usize, context: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code contract: 0 success, 1 numerical failure, 2 input error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::GridMismatch(_)
            | Error::ShapeMismatch(_)
            | Error::InvalidData(_)
            | Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::Io { .. } => 2,
            Error::RankDeficient { .. }
            | Error::Infeasible(_)
            | Error::Unbounded(_)
            | Error::NoConvergence { .. }
            | Error::NonFinite { .. } => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_input_from_numerical_failures() {
        assert_eq!(Error::InvalidData("x".into()).exit_code(), 2);
        assert_eq!(
            Error::Parse {
                path: "f.csv".into(),
                row: 3,
                column: "v".into(),
                message: "bad".into()
            }
            .exit_code(),
            2
        );
        assert_eq!(
            Error::RankDeficient {
                cond: 1e15,
                context: "m".into()
            }
            .exit_code(),
            1
        );
        assert_eq!(Error::Infeasible("x".into()).exit_code(), 1);
        assert_eq!(
            Error::NoConvergence {
                limit: 10,
                context: "x".into()
            }
            .exit_code(),
            1
        );
    }
}
