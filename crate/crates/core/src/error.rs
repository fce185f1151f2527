use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A dilation factor or iterate left the representable range.
    #[error("overflow at iteration {n}: {what}")]
    Overflow { n: usize, what: String },

    #[error("divergent series: {0}")]
    DivergentSeries(String),

    /// Exponent sits on (or straddles) the critical value of a theorem.
    #[error("critical exponent: {0}")]
    CriticalExponent(String),

    /// D_f is nonzero where the unit control function vanishes.
    #[error("perturbation cannot be bounded by the control function at ({x}, {y}): |D_f| = {residual:e}")]
    UnboundablePerturbation { x: f64, y: f64, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
