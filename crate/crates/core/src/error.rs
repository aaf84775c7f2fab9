//! Error type shared by every module of the crate.
//!
//! Two families of failures are kept deliberately distinct:
//!
//! * ordinary usage errors (bad indices, malformed inputs, degenerate fits,
//!   quadrature instability), and
//! * [`Error::HypothesisViolation`], raised when a caller asks an operator
//!   harness to run outside the parameter window in which the underlying
//!   boundedness statement holds.  These are refusals, not bugs: the message
//!   always names the inequality that failed so the caller can see which
//!   hypothesis was violated.  The command-line frontend maps them to a
//!   dedicated exit code.

use thiserror::Error;

/// Crate-wide error enum.
#[derive(Debug, Error)]
pub enum Error {
    /// A point index was out of range for the space it was used with.
    #[error("point index {index} out of range for space with {len} points")]
    IndexOutOfRange {
        /// The offending index.
        index: usize,
        /// Number of points in the space.
        len: usize,
    },

    /// A function vector did not match the number of points of its space.
    #[error("function has {got} values but the space has {expected} points")]
    LengthMismatch {
        /// Points in the space.
        expected: usize,
        /// Values supplied.
        got: usize,
    },

    /// A scalar or grid parameter was outside its documented domain.
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter {
        /// Parameter name as it appears in the API.
        name: &'static str,
        /// What was wrong with it.
        message: String,
    },

    /// A harness was asked to run outside the hypothesis window of the
    /// theorem it checks.  `requirement` states the violated inequality,
    /// `context` names the statement it comes from.
    #[error("hypothesis violated: {requirement} ({context})")]
    HypothesisViolation {
        /// The inequality that must hold, e.g. `0 < beta < 1 - gamma/p`.
        requirement: String,
        /// Which boundedness statement enforces it.
        context: &'static str,
    },

    /// Not enough usable data points for a least-squares fit.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// A quadrature self-check failed (doubling the node count moved the
    /// result more than the documented threshold, or a residual exceeded its
    /// tolerance).
    #[error("quadrature unstable: {0}")]
    QuadratureUnstable(String),

    /// A point had no neighbours at the requested scale, so the averaging
    /// operator normalisation would divide by zero.
    #[error("point {index} is isolated at scale {scale}: averaging weight is zero")]
    IsolatedPoint {
        /// Index of the isolated point.
        index: usize,
        /// Scale at which it has no mass around it.
        scale: f64,
    },

    /// Input balls that were required to be pairwise disjoint were not.
    #[error("balls {first} and {second} are not disjoint (centre distance {distance} < radius sum {radius_sum})")]
    BallsNotDisjoint {
        /// Index of the first ball.
        first: usize,
        /// Index of the second ball.
        second: usize,
        /// Distance between the centres.
        distance: f64,
        /// Sum of the two radii.
        radius_sum: f64,
    },

    /// A construction postcondition failed.  This is an internal bug, not a
    /// caller error: the covering / partition algorithms verify their own
    /// geometric conclusions exhaustively and report the first violation.
    #[error("construction invariant violated: {0}")]
    ConstructionInvariant(String),

    /// An empty input where at least one element is required.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Underlying I/O failure (file formats, kernel cache).
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// JSON (de)serialisation failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// A malformed on-disk document (missing field, inconsistent sizes).
    #[error("malformed file: {0}")]
    MalformedFile(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the error is a hypothesis-window refusal rather than a
    /// usage or construction failure.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(self, Error::HypothesisViolation { .. })
    }
}
