use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("position {x} outside the domain [0, {length}]")]
    OutOfDomain { x: f64, length: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The Taylor recursion hit its order cap on `segment`; the mesh is too
    /// coarse there.
    #[error("Taylor recursion did not converge on segment {segment} (order {order}, residual {residual:e})")]
    Truncation {
        segment: usize,
        order: usize,
        residual: f64,
    },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("transfer generator is not injective (spectral gap {gap:e})")]
    NonInjective { gap: f64 },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
