use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid bracket: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    InvalidBracket { f_lo: f64, f_hi: f64 },

    /// Cholesky met a non-positive pivot.
    #[error("matrix for block `{block}` is not positive definite (pivot {pivot}: {value:e})")]
    NotPositiveDefinite {
        block: String,
        pivot: usize,
        value: f64,
    },

    /// A block update raised the augmented Lagrangian.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Re-labels a factorization failure with the block that produced it.
    pub fn in_block(self, name: &str) -> Self {
        match self {
            Error::NotPositiveDefinite { pivot, value, .. } => Error::NotPositiveDefinite {
                block: name.to_string(),
                pivot,
                value,
            },
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
