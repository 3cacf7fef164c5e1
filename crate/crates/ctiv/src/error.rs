use std::path::PathBuf;

use ctiv_core::Error as CoreError;

/// Failures of the frontend, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or flag values.
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or invalid input data.
    #[error("{0}")]
    Data(String),
    /// A fitting or estimation stage failed.
    #[error("{0}")]
    Estimation(String),
    /// Filesystem failure.
    #[error("{path}: {source}")]
    Io {
        /// File involved.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// Error raised by the core crate.
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    /// Exit status: 1 usage, 2 data or validation, 3 estimation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io { .. } => 2,
            CliError::Estimation(_) => 3,
            CliError::Core(e) => match e {
                CoreError::Schema(_)
                | CoreError::Validation { .. }
                | CoreError::MissingValue { .. }
                | CoreError::Input(_)
                | CoreError::Dimension { .. }
                | CoreError::Split(_)
                | CoreError::EmptyAfterTrim { .. }
                | CoreError::Domain(_) => 2,
                _ => 3,
            },
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Estimation(_) => "estimation",
            CliError::Io { .. } => "io",
            CliError::Core(e) => match e {
                CoreError::Schema(_) => "schema",
                CoreError::Validation { .. } => "validation",
                CoreError::MissingValue { .. } => "missing-value",
                CoreError::Input(_) => "input",
                CoreError::Dimension { .. } => "dimension",
                CoreError::Split(_) => "split",
                CoreError::EmptyAfterTrim { .. } => "empty-after-trim",
                CoreError::Domain(_) => "domain",
                CoreError::Separation => "separation",
                CoreError::EmptyArm(_) => "empty-arm",
                CoreError::VarianceUndefined => "variance-undefined",
                CoreError::NoCompliers(_) => "no-compliers",
                CoreError::Estimation(_) => "estimation",
                CoreError::Identification => "identification",
                CoreError::Growth(_) => "growth",
                CoreError::Aggregation(_) => "aggregation",
                CoreError::Calibration(_) => "calibration",
                CoreError::UndefinedGap => "undefined-gap",
            },
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
        .to_string()
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(format!("json: {e}"))
    }
}

/// Frontend result alias.
pub type Result<T> = std::result::Result<T, CliError>;
