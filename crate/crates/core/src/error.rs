use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input is empty: {0}")]
    EmptyFile(String),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: cannot parse {value:?} as a finite number")]
    NonNumericCell {
        /// 1-based data row (the header is row 0).
        row: usize,
        column: String,
        value: String,
    },
    #[error("dataset has no covariate columns")]
    NoCovariates,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid split: validate_size {validate_size} must lie in [1, {max}] for n = {n}")]
    InvalidSplitSize {
        n: usize,
        validate_size: usize,
        max: usize,
    },

    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),
    #[error("weight at position {0} is not strictly positive")]
    NonPositiveWeight(usize),
    #[error("length mismatch: {what} has {found} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("knots must be strictly increasing (violated at position {0})")]
    UnsortedKnots(usize),
    #[error("convex solver did not converge after {max_iters} iterations (KKT residual {residual:e})")]
    SolverNotConverged { max_iters: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("alpha grid is empty")]
    EmptyGrid,
    #[error("invalid alpha grid: {0}")]
    InvalidGrid(String),
    #[error("backfitting stopped after {iterations} sweeps without converging (risk {risk:e})")]
    NotConverged { iterations: usize, risk: f64 },

    #[error("{function}: argument {value} outside [0, 1]")]
    Domain { function: &'static str, value: f64 },
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),

    #[error("need at least two distinct sample sizes >= {n_min} to fit a slope, found {found}")]
    InsufficientGrid { n_min: usize, found: usize },
    #[error("need at least two splits, got {0}")]
    InsufficientSplits(usize),
    #[error("invalid benchmark configuration: {0}")]
    InvalidBench(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
