//! Crate-wide error type.

use thiserror::Error;

/// Errors shared by all modules.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter lies outside the domain an operation is defined on.
    #[error("parameter out of domain: {0}")]
    Domain(String),
    /// A numerical procedure failed to reach its target accuracy.
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// A tail fit was requested on data that cannot support it
    /// (usually a sign the replicate budget is too small).
    #[error("fit domain error: {0}")]
    FitDomain(String),
    /// Structurally inconsistent input (mismatched lengths, bad ordering).
    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
