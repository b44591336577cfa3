use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfig(String),

    /// A published closed-form density failed verification.
    #[error("closed form for {config} group {group} failed verification: integral = {integral:.9}, min value = {min_value:.3e}")]
    ClosedFormMismatch {
        config: String,
        group: usize,
        integral: f64,
        min_value: f64,
    },

    #[error("quadrature did not converge on [{lower}, {upper}]: value {value:.6e}, error estimate {error:.3e} after {intervals} intervals")]
    Quadrature {
        lower: f64,
        upper: f64,
        value: f64,
        error: f64,
        intervals: usize,
    },

    /// The requested average power cannot be reached by any positive threshold.
    #[error(
        "infeasible budget: p_bar = {p_bar} exceeds attainable constraint value {supremum:.6e}"
    )]
    InfeasibleBudget { p_bar: f64, supremum: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
