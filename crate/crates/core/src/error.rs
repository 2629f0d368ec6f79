use thiserror::Error;

/// Errors produced by the geometry, estimation, fusion and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("excluded geometry: receiver angle {theta2_deg:.2} deg lies in a collinearity band")]
    Excluded { theta2_deg: f64 },

    #[error("ill-conditioned measurement jacobian (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("detection failure: {0}")]
    Detection(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad user input (config files, flags).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
