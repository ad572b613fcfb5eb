use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors raised by the core routines.
///
/// Contract violations (wrong lengths, empty inputs, out-of-range
/// parameters) are distinguished from numeric failures so that callers can
/// map them onto different exit paths.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector had the wrong length for the target dimension.
    DimensionMismatch { expected: usize, found: usize },
    /// Two empirical measures were compared with different atom counts.
    SizeMismatch { left: usize, right: usize },
    /// An empirical measure, test family or grid was empty.
    Empty(&'static str),
    /// An input contained NaN or an infinity.
    NonFinite(&'static str),
    /// A parameter was outside its admissible range.
    InvalidParameter { name: &'static str, reason: String },
    /// A test function is not 1-Lipschitz or not bounded by 1.
    NotInLipschitzBall { knot: usize },
    /// Adaptive quadrature did not reach its tolerance.
    Quadrature { density: String, estimate: f64, error: f64 },
    /// An Euler–Maruyama path left the guard region.
    Diverged { step: u64, value: f64 },
    /// The objective handed to the scale optimiser is not unimodal on the
    /// scanned grid; the grid is returned for inspection.
    NotUnimodal { grid: Vec<(f64, f64)> },
    /// No registered density carries this name.
    UnknownTarget(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::SizeMismatch { left, right } => write!(
                f,
                "empirical measures have {left} and {right} atoms; resample to a common size first"
            ),
            Error::Empty(what) => write!(f, "{what} must be non-empty"),
            Error::NonFinite(what) => write!(f, "{what} contains a non-finite value"),
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::NotInLipschitzBall { knot } => write!(
                f,
                "test function leaves the 1-Lipschitz, |f| <= 1 class at knot {knot}"
            ),
            Error::Quadrature {
                density,
                estimate,
                error,
            } => write!(
                f,
                "quadrature for density `{density}` did not converge (estimate {estimate}, error {error})"
            ),
            Error::Diverged { step, value } => write!(
                f,
                "diffusion path diverged at step {step} (|U| = {value:e}); reduce dt"
            ),
            Error::NotUnimodal { grid } => {
                write!(f, "objective is not unimodal on the scan grid:")?;
                for (x, y) in grid {
                    write!(f, " ({x:.4}, {y:.6})")?;
                }
                Ok(())
            }
            Error::UnknownTarget(name) => write!(f, "unknown target density `{name}`"),
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of a numeric procedure, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. } | Error::Diverged { .. } | Error::NotUnimodal { .. }
        )
    }
}
