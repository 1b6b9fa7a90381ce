//! Error type shared across the verifier.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifierError {
    /// Model or property file could not be read or parsed.
    #[error("failed to load {path}: {reason}")]
    Load { path: String, reason: String },

    /// Layer shapes do not chain, or a vector has the wrong length.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A weight, bias, bound or input contains NaN/inf where finite values are required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Operation requires a scalar-output network (specification already merged).
    #[error("network has {got} outputs; expected a single merged output")]
    NotScalarOutput { got: usize },

    /// Operation is only defined for the given norm.
    #[error("unsupported norm for {op}: {norm}")]
    UnsupportedNorm { op: &'static str, norm: String },

    /// Exact enumeration refused: too many unstable neurons.
    #[error("enumeration guard: {unstable} unstable neurons exceeds the cap of {cap}")]
    EnumerationGuard { unstable: usize, cap: usize },

    /// LP solver failed in a way that indicates a malformed problem.
    #[error("linear program error: {0}")]
    Lp(String),

    /// Writing a run log or report failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// An internal invariant was violated; indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, VerifierError>;
