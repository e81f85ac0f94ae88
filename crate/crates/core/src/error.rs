use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A Lévy density whose `min(1, t)` integral diverges.
    #[error("integrability error: {0}")]
    Integrability(String),

    /// A value outside the range of a bounded Bernstein function.
    #[error("range error: {0}")]
    Range(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Quadrature could not reach the requested tolerance.
    #[error("accuracy error: {context} (achieved error bound {achieved:e})")]
    Accuracy { context: String, achieved: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
