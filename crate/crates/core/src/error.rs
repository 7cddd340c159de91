use thiserror::Error;

/// Failures reported by the evaluators and experiment harnesses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("domain error: {0}")]
    Domain(String),
    /// The density at the probe fell below the configured floor, so any
    /// quantity containing 1/ρ is meaningless there.
    #[error("degenerate density: ln(rho/peak) = {log_ratio:.3} is below the floor")]
    DegenerateDensity { log_ratio: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("structural mismatch: {0}")]
    Structure(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::DegenerateDensity { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
