use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A phase code does not fit the geometry it is applied to.
    #[error("code is {code_rows}x{code_cols} but the array is {rows}x{cols}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        code_rows: usize,
        code_cols: usize,
    },

    /// A structurally invalid value (ragged code, non-binary entry, bad table).
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// A root-finding target lies outside the search bracket.
    #[error("target {target} is outside the searchable bracket [{lo}, {hi}]")]
    OutOfBracket { target: f64, lo: f64, hi: f64 },

    /// Exhaustive search refused because the instance is too large.
    #[error("exhaustive search over {elements} elements refused (limit {limit})")]
    TooLarge { elements: usize, limit: usize },

    /// The measured amplitudes cannot be reproduced by scaling the model.
    #[error("calibration impossible: {0}")]
    Calibration(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
