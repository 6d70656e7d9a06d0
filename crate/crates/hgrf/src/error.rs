//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by model evaluation, simulation, estimation and I/O.
#[derive(Debug, Error)]
pub enum HgrfError {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Radial derivative ladder order above the supported maximum (4).
    #[error("unsupported derivative order {order} (maximum is 4)")]
    UnsupportedOrder { order: usize },

    /// A derivative was requested at the origin that does not exist for the
    /// given smoothness.
    #[error("derivative of order {order} does not exist near r = 0 for nu = {nu}")]
    NonDifferentiable { order: usize, nu: f64 },

    /// A covariance block involving a derived variable whose variance is
    /// infinite at the requested smoothness.
    #[error("insufficient smoothness for block {block}: requires nu > {required}, got nu = {nu}")]
    Smoothness {
        block: String,
        required: f64,
        nu: f64,
    },

    /// A computed quantity came out non-finite.
    #[error("internal consistency error: {0}")]
    NonFinite(String),

    /// Circulant embedding failed even at maximum padding.
    #[error(
        "circulant embedding failed at padding {pad}x: most negative torus eigenvalue {most_negative:e} (max {max_eigenvalue:e})"
    )]
    Embedding {
        pad: usize,
        most_negative: f64,
        max_eigenvalue: f64,
    },

    /// A composite-likelihood block could not be factorized.
    #[error("composite likelihood evaluation failed at lag ({lag_x}, {lag_y}): {reason}")]
    Evaluation {
        lag_x: i64,
        lag_y: i64,
        reason: String,
    },

    /// Every optimizer start failed to converge.
    #[error("optimization failed to converge in all {n_starts} starts")]
    NonConvergence { n_starts: usize },

    /// The observation covariance is numerically singular.
    #[error("singular observation covariance: {0}")]
    Conditioning(String),

    /// The input field is degenerate for the requested statistic.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A size or shape precondition failed.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// File or stream I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A text input could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, HgrfError>;
