use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error at row {row}, column `{column}`: cannot read {value:?} as a number")]
    Parse {
        /// 1-based data row (header excluded).
        row: usize,
        column: String,
        value: String,
    },

    #[error("bin selection error: {0}")]
    Selection(String),

    #[error("evaluation point {x} outside support [{lo}, {hi}]")]
    OutOfSupport { x: f64, lo: f64, hi: f64 },

    #[error("singular fit in {block} block: {detail}")]
    Singular { block: String, detail: String },

    #[error("sample size {n} too small: need more than {required} observations")]
    SampleSize { n: usize, required: usize },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("variance error: {0}")]
    Variance(String),

    #[error("model error: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Broad class used by front ends to pick an exit status.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Unsupported(_) | Error::Selection(_) => ErrorClass::Config,
            Error::Data(_)
            | Error::Parse { .. }
            | Error::SampleSize { .. }
            | Error::Io(_)
            | Error::Csv(_) => ErrorClass::Data,
            Error::OutOfSupport { .. }
            | Error::Singular { .. }
            | Error::Variance(_)
            | Error::Model(_) => ErrorClass::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
