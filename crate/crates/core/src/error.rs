//! Error type shared by all modules.

use alloc::string::String;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or inconsistent inputs (shape mismatches, non-finite values,
    /// labels that do not cover every group).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An operation's precondition does not hold (odd sample size where a
    /// matching is required, too few samples for a variance formula).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Numerical failure (covariance not positive definite, degenerate
    /// variance, density evaluating to zero where mass is required).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Request outside the supported envelope (enumeration guards,
    /// parametric tests beyond their dimension bounds).
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;
