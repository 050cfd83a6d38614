use thiserror::Error;

pub type Result<T> = std::result::Result<T, KosError>;

#[derive(Debug, Error)]
pub enum KosError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("need at least {required} samples, got {actual}")]
    TooFewSamples { required: usize, actual: usize },

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("class of size {size} cannot be split into {parts} parts")]
    ClassTooSmall { size: usize, parts: usize },

    #[error("expected exactly two distinct labels, found {}: [{}]", .0.len(), .0.join(", "))]
    LabelCount(Vec<String>),

    #[error("system matrix is not numerically positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { pivot: f64, row: usize },

    #[error("degenerate kernel: double-centered kernel matrix is identically zero")]
    DegenerateKernel,

    #[error("bandwidth candidate at quantile {level} is zero (duplicate points across classes)")]
    ZeroQuantile { level: f64 },

    #[error("model is degenerate: projected centroids coincide")]
    DegenerateModel,

    #[error("failed to generate a dataset with two non-empty classes after {0} attempts")]
    GenerationFailed(usize),

    #[error("{path}: row {row}, column {column}: cannot parse {value:?} as a number")]
    ParseCell {
        path: String,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{0}")]
    Format(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("invalid model field `{field}`: {reason}")]
    InvalidModel { field: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn ensure_finite<'a, I>(values: I, context: &'static str) -> Result<()>
where
    I: IntoIterator<Item = &'a f64>,
{
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(KosError::NonFinite(context))
    }
}
