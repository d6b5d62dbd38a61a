use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid language code {0:?}: expected three lowercase ASCII letters")]
    InvalidLanguage(String),
    #[error("invalid identifier {0:?}")]
    InvalidIdentifier(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("zero-norm row {0}")]
    ZeroNormRow(usize),
    #[error("row {row} has L2 norm {norm}, expected 1 within {tolerance}")]
    NotNormalized {
        row: usize,
        norm: f64,
        tolerance: f64,
    },
    #[error("unnormalized input: {0}")]
    UnnormalizedInput(String),
    #[error("CSLS undefined for N = {0} (need N >= 2)")]
    CslsUndefined(usize),
    #[error("CKA needs N >= 4 sentences, got {0}")]
    CkaTooFewSentences(usize),
    #[error("degenerate Gram structure")]
    DegenerateGram,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {required} samples, got {actual}")]
    TooFewSamples { required: usize, actual: usize },
    #[error("undefined correlation: zero rank variance")]
    UndefinedCorrelation,
    #[error("non-finite input value at index {0}")]
    NonFiniteInput(usize),
    #[error("score out of range: {0}")]
    ScoreOutOfRange(f64),
    #[error("value out of range: {0}")]
    ValueOutOfRange(String),
    #[error("source and target must differ (both {0})")]
    SameLanguage(String),
    #[error("duplicate key {0}")]
    DuplicateKey(String),
    #[error("no overlapping pairs")]
    NoOverlap,
    #[error("fully pooled correlation across models and tasks is refused without allow_pooled")]
    PooledRefused,
    #[error("missing {0}")]
    Missing(String),
    #[error("incomplete grid, missing cells: {0}")]
    IncompleteGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
