use thiserror::Error;

/// Errors raised by the analytics, codec and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside the range the component accepts.
    #[error("configuration error: {0}")]
    Config(String),

    /// Shapes of operands do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("division by zero in GF(2^{0})")]
    DivisionByZero(u32),

    /// A rate or probability lies outside the domain of the selected block-error model.
    #[error("outside model domain: {0}")]
    ModelDomain(String),

    /// An operation was invoked in the wrong state (e.g. decoding before full rank).
    #[error("invalid state: {0}")]
    State(String),

    /// A one-dimensional search could not establish a bracket around a minimum.
    #[error("search failed: {0}")]
    Search(String),
}

pub type Result<T> = std::result::Result<T, Error>;
