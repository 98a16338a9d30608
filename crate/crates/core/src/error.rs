use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(String),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("input is empty")]
    EmptyInput,

    #[error("panel needs at least 2 series, found {0}")]
    TooFewSeries(usize),

    #[error("duplicate series name '{0}'")]
    DuplicateName(String),

    #[error("empty series name in column {0}")]
    EmptyName(usize),

    #[error("could not parse date '{value}' on line {line}")]
    BadDate { line: usize, value: String },

    #[error("duplicate date {0}")]
    DuplicateDate(String),

    #[error("non-positive price {value} at row {row} ({date}), column '{column}'")]
    NonPositivePrice {
        row: usize,
        date: String,
        column: String,
        value: f64,
    },

    #[error("series '{0}' has no observations")]
    EmptySeries(String),

    #[error("missing value at row {row}, column '{column}'; run forward_fill first")]
    MissingValue { row: usize, column: String },

    #[error("window length {length} is invalid for {rows} rows")]
    WindowLength { length: usize, rows: usize },

    #[error("window of {rows} rows is too short, need at least {required}")]
    InsufficientRows { rows: usize, required: usize },

    #[error("series index {index} out of range for {k} series")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("{0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate (constant) series: {0}")]
    Degenerate(String),

    #[error("constant design column: series {series}, lag {lag}")]
    ConstantColumn { series: usize, lag: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("not a correlation matrix: eigenvalue {0:e} below tolerance")]
    NegativeEigenvalue(f64),

    #[error("decomposed R² {0} exceeds 1")]
    InvalidRSquared(f64),

    #[error("singular regressor cross-product")]
    Singular,

    #[error("equation {k}: {source}")]
    Equation { k: usize, source: Box<Error> },

    #[error("pair ({i}, {j}): {source}")]
    Pair {
        i: usize,
        j: usize,
        source: Box<Error>,
    },

    #[error("every window failed; first failure: {0}")]
    AllWindowsFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
