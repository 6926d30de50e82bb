use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("distribution has no mass")]
    DegenerateDistribution,

    #[error("density has two separated maxima at {first:.6} and {second:.6} rad")]
    BimodalDistribution { first: f64, second: f64 },

    #[error("grid mismatch: {left} vs {right} points")]
    GridMismatch { left: usize, right: usize },

    #[error("state support reaches the photon-number cutoff {n_cut}")]
    TruncationOverflow { n_cut: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("unsupported specification: {0}")]
    UnsupportedSpec(String),

    #[error("numerical failure in {context} (residual {residual:.3e})")]
    NumericalFailure { context: String, residual: f64 },

    #[error("invalid config at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn numerical(context: impl Into<String>, residual: f64) -> Self {
        Error::NumericalFailure {
            context: context.into(),
            residual,
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidParameter(_) | Error::InvalidRecord(_) => 2,
            Error::UnsupportedSpec(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
