//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong while loading data, building a problem, or
/// running a solver.
#[derive(Debug, Error)]
pub enum Error {
    /// A malformed line in a sparse `label index:value` file.
    #[error("sparse parse error at line {line}: {message}")]
    SparseParse { line: usize, message: String },

    /// A malformed cell or row in a delimited file.
    #[error("csv parse error at row {row}, column {column}: {message}")]
    CsvParse {
        row: usize,
        column: String,
        message: String,
    },

    /// A column requested by name does not exist in the header.
    #[error("column {0:?} not found in header")]
    MissingColumn(String),

    /// The sensitive feature index lies outside the parsed feature range.
    #[error("sensitive feature index {index} out of range (dataset has {dim} features)")]
    SensitiveIndexOutOfRange { index: usize, dim: usize },

    /// A dataset with no rows (or no usable rows) was produced.
    #[error("dataset is empty")]
    EmptyDataset,

    /// Split fractions must be positive and sum to 1.
    #[error("invalid split fractions {fractions:?}: {message}")]
    InvalidFractions {
        fractions: [f64; 3],
        message: String,
    },

    /// A requested split received zero points.
    #[error("split {name:?} is empty (n = {n}, fractions {fractions:?})")]
    EmptySplit {
        name: &'static str,
        n: usize,
        fractions: [f64; 3],
    },

    /// A group selector matched no points of the dataset it must describe.
    #[error("group {selector} has no points in this dataset")]
    EmptyGroup { selector: String },

    /// Scores/labels/feature vectors with incompatible lengths.
    #[error("length mismatch: expected {expected}, got {got} ({context})")]
    LengthMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    /// A checkpoint file that cannot be decoded.
    #[error("checkpoint parse error: {0}")]
    Checkpoint(String),

    /// A scalar or structured configuration value outside its admissible range.
    #[error("invalid value for {field}: {message}")]
    InvalidConfig { field: String, message: String },

    /// A dual iterate outside the feasible dual domain where interiority is required.
    #[error("dual point rejected: {0}")]
    InvalidDualPoint(String),

    /// A gradient evaluation produced NaN or infinity.
    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
