use thiserror::Error;

/// Every failure the library can report.
///
/// The variant name doubles as the error class printed by the command line
/// tool, see [`Error::class_name`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular matrix: pivot {pivot:e} is below {threshold:e}")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("right-hand side is not orthogonal to the ones vector (sum {sum:e})")]
    NotBalanced { sum: f64 },

    #[error("matrix is not Schur stable ({0})")]
    NotSchurStable(String),

    #[error("matrix is not substochastic: {0}")]
    NotSubstochastic(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("sampled matrix product has zero norm")]
    DegenerateProduct,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("node {0} has no outgoing links")]
    DanglingNode(usize),

    #[error("edge ({0}, {1}) is not in the graph")]
    EdgeNotInGraph(usize, usize),

    #[error("step size {tau} must be below 1/d_max = {limit}")]
    TauTooLarge { tau: f64, limit: f64 },

    #[error("vector is not stochastic: {0}")]
    NotStochastic(String),

    #[error("row {row} of the influence matrix sums to {sum}")]
    NotRowStochastic { row: usize, sum: f64 },

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

impl Error {
    pub fn class_name(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotSquare { .. } => "NotSquare",
            Error::NonFinite(_) => "NonFinite",
            Error::SingularMatrix { .. } => "SingularMatrix",
            Error::NotBalanced { .. } => "NotBalanced",
            Error::NotSchurStable(_) => "NotSchurStable",
            Error::NotSubstochastic(_) => "NotSubstochastic",
            Error::InvalidProbabilities(_) => "InvalidProbabilities",
            Error::DegenerateProduct => "DegenerateProduct",
            Error::InvalidGraph(_) => "InvalidGraph",
            Error::DanglingNode(_) => "DanglingNode",
            Error::EdgeNotInGraph(..) => "EdgeNotInGraph",
            Error::TauTooLarge { .. } => "TauTooLarge",
            Error::NotStochastic(_) => "NotStochastic",
            Error::NotRowStochastic { .. } => "NotRowStochastic",
            Error::NegativeEntry { .. } => "NegativeEntry",
            Error::AssumptionViolated(_) => "AssumptionViolated",
            Error::InvariantViolation(_) => "InvariantViolation",
            Error::InvalidParameter { .. } => "InvalidParameter",
        }
    }

    pub(crate) fn dims(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
