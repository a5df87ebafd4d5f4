use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched lengths or dimensions.
    #[error("input shape: {0}")]
    Shape(String),

    /// A value outside the operation's domain, e.g. a non-positive variance.
    #[error("domain error: {0}")]
    Domain(String),

    /// Dividing two Gaussians with identical variance (the quotient is flat).
    #[error("degenerate Gaussian division: numerator and denominator variance both {0}")]
    DegenerateDivision(f64),

    /// Cholesky-type factorization hit a non-positive pivot.
    #[error("matrix is not numerically positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("LDPC construction failed after {attempts} attempts: {reason}")]
    Construction { attempts: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// An error raised inside the iterative loops, annotated with where it
    /// happened. `outer` is unset when raised by a standalone equalization.
    #[error("{}inner sweep {inner}: {source}", .outer.map(|t| format!("turbo iteration {t}, ")).unwrap_or_default())]
    Located {
        outer: Option<usize>,
        inner: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_sweep(self, inner: usize) -> Self {
        Error::Located {
            outer: None,
            inner,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_turbo_iteration(self, t: usize) -> Self {
        match self {
            Error::Located { outer: None, inner, source } => Error::Located {
                outer: Some(t),
                inner,
                source,
            },
            other => Error::Located {
                outer: Some(t),
                inner: 0,
                source: Box::new(other),
            },
        }
    }
}
