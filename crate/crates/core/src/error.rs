use alloc::string::String;
use alloc::vec::Vec;

/// Errors produced by the simulation and exploration pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter violated its documented domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        /// Parameter name.
        name: &'static str,
        /// What was wrong with it.
        reason: String,
    },

    /// Two inputs that must agree in size do not.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch {
        /// Required size.
        expected: usize,
        /// Supplied size.
        actual: usize,
    },

    /// Newton iteration ran out of budget.
    #[error("DC solve did not converge after {iterations} iterations (max KCL residual {residual:e} A)")]
    NonConvergence {
        /// Iterations performed.
        iterations: usize,
        /// Max absolute node-current residual at the last iterate.
        residual: f64,
    },

    /// The linearized nodal system could not be solved.
    #[error("singular nodal system: {0}")]
    SingularSystem(String),

    /// A solver failure inside a testbench segment.
    #[error("segment {row} sample {sample}: {source}")]
    Segment {
        /// Driven row.
        row: usize,
        /// Index of the triangle sample being solved.
        sample: usize,
        /// Underlying solver error.
        source: alloc::boxed::Box<Error>,
    },

    /// One or more segments of a characterization run failed.
    #[error("characterization of N={n} failed in {} segment(s); first: {}", .failures.len(), .failures.first().map(|e| alloc::format!("{e}")).unwrap_or_default())]
    Characterization {
        /// Array size.
        n: usize,
        /// All segment failures, in row order.
        failures: Vec<Error>,
    },

    /// Results built under different device/wire/testbench settings were mixed.
    #[error("fingerprint mismatch: {expected} vs {actual} (N={n})")]
    FingerprintMismatch {
        /// Fingerprint of the first result.
        expected: String,
        /// Offending fingerprint.
        actual: String,
        /// Size of the offending result.
        n: usize,
    },

    /// Surrogate construction needs at least two distinct sizes.
    #[error("insufficient sizes for a surrogate: {0}")]
    InsufficientSizes(String),

    /// A query fell outside the characterized range.
    #[error("{axis} = {value} outside characterized range [{min}, {max}]")]
    OutOfRange {
        /// Axis name.
        axis: &'static str,
        /// Queried value.
        value: f64,
        /// Lowest knot.
        min: f64,
        /// Highest knot.
        max: f64,
    },

    /// Calibration could not bring every anchor within tolerance.
    #[error("calibration failed after {iterations} iterations: worst relative residual {worst:.4} exceeds {tolerance}")]
    Calibration {
        /// Iterations performed.
        iterations: usize,
        /// Largest |relative residual| over anchors.
        worst: f64,
        /// Required bound.
        tolerance: f64,
    },

    /// No grid point satisfied all constraints.
    #[error("no feasible design point; least-violating point n={n} f={f:e} bits={bits} (violation {violation:.4})")]
    NoFeasiblePoint {
        /// Array size of the least-violating point.
        n: usize,
        /// Frequency of the least-violating point.
        f: f64,
        /// ADC resolution of the least-violating point.
        bits: u32,
        /// Summed relative constraint violation.
        violation: f64,
    },
}

/// Crate result alias.
pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Rejects values that are not finite and strictly positive.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, alloc::format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, alloc::format!("must be finite and >= 0, got {value}")))
    }
}
