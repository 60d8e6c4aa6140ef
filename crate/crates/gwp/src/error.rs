use thiserror::Error;

/// Unified error type for the crate.
///
/// Numerical routines distinguish between caller mistakes (invalid
/// parameters, domain violations, malformed inputs) and in-band analysis
/// outcomes (non-convergence, iteration caps, infinite moments) so callers
/// can report the latter without aborting a batch run.
#[derive(Error, Debug)]
pub enum Error {
    /// A distribution or process parameter violates its constraint.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An argument lies outside the mathematical domain of the routine.
    #[error("domain error in {what}: {reason}")]
    Domain { what: &'static str, reason: String },

    /// A series or iteration failed to converge under its stopping rule.
    #[error("{what} did not converge: {reason}")]
    NonConvergence { what: &'static str, reason: String },

    /// An iterative solver hit its iteration cap before reaching tolerance.
    #[error("iteration cap {cap} reached in {what}")]
    IterationCap { what: &'static str, cap: u32 },

    /// A quantile search walked past the configured support cap.
    #[error("quantile search for q = {q} exceeded support cap {cap}")]
    QuantileOverflow { q: f64, cap: u64 },

    /// The requested moment does not exist for these parameters.
    #[error("moment of order {order} is infinite for rho = {rho}")]
    InfiniteMoment { order: u32, rho: f64 },

    /// Two containers that must agree in length or dimension do not.
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A cell, mark, or axis index is out of range.
    #[error("{what} index {index} out of range (< {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    /// A list of indices contains a repeated entry.
    #[error("duplicate {what} index {index}")]
    DuplicateIndex { what: &'static str, index: usize },

    /// Count fields from structurally different grids cannot be pooled.
    #[error("heterogeneous grids: {reason}")]
    HeterogeneousGrids { reason: String },

    /// Too few observations for the requested estimator.
    #[error("insufficient sample: need at least {need} observations, got {got}")]
    InsufficientSample { need: usize, got: usize },

    /// Finite-precision evaluation degenerated (underflow or total
    /// cancellation) before a meaningful value could be produced.
    #[error("degenerate input for {what}: {reason}")]
    DegenerateInput { what: &'static str, reason: String },

    /// Filesystem failure while reading or writing artifacts.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A text artifact could not be parsed.
    #[error("parse error in {path} line {line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            what,
            reason: reason.into(),
        }
    }
}
