use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("seeding depth too shallow: first-order term scale {scale:.3e} exceeds {limit:.1e}")]
    SeedTooShallow { scale: f64, limit: f64 },

    #[error("invalid bracket: outcome at lo = {lo}, outcome at hi = {hi}")]
    Bracket { lo: String, hi: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
