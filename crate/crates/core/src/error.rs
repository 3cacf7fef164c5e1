use alloc::string::String;

/// Errors produced by the estimators, the tree builder and the generators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A required column or field is absent.
    #[error("schema error: {0}")]
    Schema(String),
    /// A value violates a data invariant. Rows are 1-based data rows.
    #[error("row {row}: {message}")]
    Validation {
        /// 1-based data row.
        row: usize,
        /// What was wrong.
        message: String,
    },
    /// Blank or non-finite cell. Rows are 1-based data rows.
    #[error("row {row}: missing value in column `{column}`")]
    MissingValue {
        /// 1-based data row.
        row: usize,
        /// Column name.
        column: String,
    },
    /// Malformed argument to an estimator.
    #[error("input error: {0}")]
    Input(String),
    /// Covariate vector of the wrong length.
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    Dimension {
        /// Number of features the model was fit with.
        expected: usize,
        /// Number supplied.
        got: usize,
    },
    /// Holdout split cannot be formed.
    #[error("split error: {0}")]
    Split(String),
    /// Trimming removed every unit.
    #[error("no units left after trimming propensities to [{lo}, {hi}]")]
    EmptyAfterTrim {
        /// Lower bound.
        lo: f64,
        /// Upper bound.
        hi: f64,
    },
    /// Unpenalized logistic fit on a single-class label vector.
    #[error("labels contain a single class; logistic fit needs ridge_lambda > 0")]
    Separation,
    /// Probability outside the open unit interval.
    #[error("propensity {0} outside (0, 1)")]
    Domain(f64),
    /// An arm of a leaf has no units.
    #[error("empty arm: {0}")]
    EmptyArm(&'static str),
    /// Neyman variance needs two units per arm.
    #[error("variance undefined: an arm has fewer than 2 units")]
    VarianceUndefined,
    /// Estimated complier share is not positive.
    #[error("no compliers: estimated complier share {0} is not positive")]
    NoCompliers(f64),
    /// Rank-deficient design or similar numerical failure.
    #[error("estimation error: {0}")]
    Estimation(String),
    /// First-stage coefficient is exactly zero.
    #[error("identification error: first-stage coefficient is zero")]
    Identification,
    /// The tree cannot be grown.
    #[error("growth error: {0}")]
    Growth(String),
    /// Aggregating leaf effects failed.
    #[error("aggregation error: {0}")]
    Aggregation(String),
    /// Generated correlations missed their targets.
    #[error("calibration error: {0}")]
    Calibration(String),
    /// Relative gap with a zero baseline MSE.
    #[error("relative gap undefined: CT MSE is zero")]
    UndefinedGap,
}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
