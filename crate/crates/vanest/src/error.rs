//! Crate-wide error type.

use thiserror::Error;

/// Errors reported by construction, evaluation, and I/O entry points.
///
/// Internal invariants (canonical keys, verified shapes) panic instead; these
/// variants cover conditions a caller can trigger with valid Rust values.
#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched dimensions, degrees, or argument arities.
    #[error("dimension mismatch: {0}")]
    Dim(String),
    /// A catalog lookup with an unrecognized name.
    #[error("unknown catalog name: {0}")]
    UnknownName(String),
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A jet monomial beyond the truncation order of its context.
    #[error("truncation exceeded: {0}")]
    Truncation(String),
    /// Expression text that does not parse.
    #[error("parse error at byte {at}: {msg}")]
    Parse {
        /// Byte offset into the source text.
        at: usize,
        /// Human-readable description.
        msg: String,
    },
    /// A structurally valid config with unusable contents.
    #[error("config error: {0}")]
    Config(String),
    /// Filesystem failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// Malformed JSON input.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
