use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Lévy measure: {0}")]
    InvalidMeasure(String),
    #[error("Lévy measure has infinite mass above truncation {truncation}")]
    InfiniteMass { truncation: f64 },
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("laws use different binnings")]
    BinningMismatch,
    #[error("degenerate binning: {0}")]
    DegenerateBinning(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for numeric-divergence outcomes (as opposed to bad input).
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::InfiniteMass { .. } | Error::Divergent(_))
    }
}
