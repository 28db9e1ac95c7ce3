//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by parsing, construction and the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// The input text is not well-formed (e.g. invalid JSON).
    #[error("parse error: {0}")]
    Parse(String),

    /// The input is well-formed text but violates the document schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// Matrix or vector dimensions are inconsistent with each other.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numerical routine failed to produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A dimension profile requests an impossible network shape.
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    /// The steering horizon is too short to reach the requested target.
    #[error(
        "horizon too short: projected steering map has row rank {achieved} < {required} \
         at horizon {horizon}"
    )]
    HorizonTooShort {
        horizon: usize,
        achieved: usize,
        required: usize,
    },

    /// A file could not be read or written.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
