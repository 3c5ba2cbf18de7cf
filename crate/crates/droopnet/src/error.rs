//! Crate-wide error type.
//!
//! Every fallible public operation returns [`Result`]. Variants carry enough
//! context to be rendered as machine-readable diagnostics by the CLI.

use thiserror::Error;

/// Errors produced by grid construction, solving, compression, model I/O and
/// training.
#[derive(Debug, Error)]
pub enum Error {
    /// Cholesky factorization hit a non-positive pivot; the matrix is not
    /// symmetric positive definite. `node` is the grid node (row) at which
    /// the pivot failed.
    #[error("system matrix is not positive definite (pivot failure at node {node})")]
    NotSpd { node: usize },

    /// Temporal compression was asked to keep `round(r·N) = 0` stamps.
    #[error("compression rate {rate} keeps zero of {stamps} stamps")]
    InvalidRate { rate: f64, stamps: usize },

    /// A grid failed validation; the string lists the first violated rule.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// A generation/config spec violates its documented preconditions.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// Tensor/map dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A file exists but its contents are not a valid instance of the format.
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    /// Underlying filesystem failure, annotated with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Training produced a non-finite loss.
    #[error("training diverged: {0}")]
    Diverged(String),

    /// Any other violated precondition.
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    /// Stable machine-readable code for CLI error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotSpd { .. } => "not_spd",
            Error::InvalidRate { .. } => "invalid_rate",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::Diverged(_) => "diverged",
            Error::Invalid(_) => "invalid",
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Attach a path to a raw `std::io::Error`.
pub fn io_err(path: &std::path::Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}
