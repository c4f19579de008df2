use thiserror::Error;

/// Errors raised by the modelling and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quantity {x} outside valid range [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("degenerate market: {0}")]
    DegenerateMarket(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("market does not clear: {0}")]
    NoClearing(String),

    #[error("unbounded trade: {0}")]
    Unbounded(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not convex: {0}")]
    NotConvex(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("gap in price series after {0}")]
    Gap(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
