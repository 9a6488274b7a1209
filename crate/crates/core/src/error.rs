use core::fmt;

/// Errors produced by the models, solvers and simulator.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    Domain { what: &'static str, value: f64 },
    /// A model parameter violates its invariant.
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    /// An iterative method stopped before meeting its tolerance.
    NoConvergence {
        what: &'static str,
        iterations: usize,
        lo: f64,
        hi: f64,
    },
    /// The chain has no stationary distribution within the truncation cap.
    UnstableChain { truncation: usize },
    /// The characteristic polynomial does not have one root inside the
    /// unit circle per boundary condition.
    RootCount { expected: usize, found: usize },
    /// A probability vector does not sum to one.
    Unnormalized { sum: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::NoConvergence {
                what,
                iterations,
                lo,
                hi,
            } => write!(
                f,
                "{what} did not converge after {iterations} iterations (final bracket [{lo}, {hi}])"
            ),
            Error::UnstableChain { truncation } => write!(
                f,
                "chain tail mass does not vanish below truncation level {truncation}"
            ),
            Error::RootCount { expected, found } => write!(
                f,
                "expected {expected} characteristic roots inside the unit circle, found {found}"
            ),
            Error::Unnormalized { sum } => write!(f, "probabilities sum to {sum}, not 1"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
