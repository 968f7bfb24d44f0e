use thiserror::Error;

/// Broad failure classes, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data or arguments.
    Data,
    /// A numerical procedure could not produce a valid answer.
    Numerical,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid column index {index} (frame has {n_cols} columns)")]
    InvalidColumn { index: usize, n_cols: usize },

    #[error("unknown column name {0:?}")]
    UnknownColumn(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("no available observations in column {col}")]
    NoAvailable { col: usize },

    #[error("columns ({r}, {s}) have {count} jointly observed rows, need at least {min}")]
    InsufficientPairCount {
        r: usize,
        s: usize,
        count: usize,
        min: usize,
    },

    #[error("column {col} has zero variance")]
    ZeroVariance { col: usize },

    #[error("{0}")]
    Singular(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NotConverged { sweeps: usize },

    #[error("at least one negative eigenvalue (smallest {value:e})")]
    NegativeEigenvalue { value: f64 },

    #[error("too few complete rows: have {have}, need {need}")]
    TooFewCompleteRows { have: usize, need: usize },

    #[error("delta method: perturbed system singular at coordinate {coord} (try a smaller step)")]
    DeltaSingular { coord: usize },

    #[error("bootstrap unstable: {failed} of {total} refits failed")]
    BootstrapUnstable { failed: usize, total: usize },

    #[error("count {value} in cell {cell:?} is not a nonnegative integer")]
    NonIntegerCount { cell: [usize; 3], value: f64 },

    #[error("no records intact on factors {0:?}")]
    NoIntactRecords(Vec<usize>),

    #[error("iterative proportional fitting did not converge after {iterations} iterations (max margin discrepancy {discrepancy:e})")]
    IpfNotConverged { iterations: usize, discrepancy: f64 },

    #[error("structural zero unsupported for coefficient extraction")]
    StructuralZero,

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("parse error at line {line}, field {field}: {message}")]
    Parse {
        line: usize,
        field: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Singular(_)
            | Error::NotSymmetric(_)
            | Error::NotConverged { .. }
            | Error::NegativeEigenvalue { .. }
            | Error::DeltaSingular { .. }
            | Error::BootstrapUnstable { .. }
            | Error::IpfNotConverged { .. }
            | Error::StructuralZero => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
