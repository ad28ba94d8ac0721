use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The document could not be decoded at all.
    #[error("parse error: {0}")]
    Parse(String),

    /// The document decoded but breaks a data-model invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown {kind} `{value}`")]
    UnknownCategory { kind: &'static str, value: String },

    #[error("missing feature `{0}`")]
    MissingFeature(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular design matrix: column(s) {0:?} linearly dependent on earlier columns or the intercept")]
    Singular(Vec<String>),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of numeric procedures rather than bad inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Singular(_) | Error::Domain(_))
    }
}
