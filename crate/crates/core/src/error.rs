use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// A pair (or the pair set jointly) cannot be served in cellular mode.
    #[error("cellular mode infeasible: {0}")]
    CellularInfeasible(String),

    #[error("exhaustive enumeration is limited to {max} pairs, got {got}")]
    TooManyPairs { got: usize, max: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("scenario file: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
