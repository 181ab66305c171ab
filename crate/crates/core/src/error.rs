use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("zero has no valuation")]
    NoValuation,

    #[error("insufficient p-adic precision: need exponent {needed}, have {available}")]
    Precision { needed: i64, available: i64 },

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),

    #[error("central character has conductor {m} > n/2 = {n}/2 for a supercuspidal")]
    Tunnell { n: u32, m: u32 },

    #[error("supercuspidal oracle has no entry for twist {0}")]
    MissingOracleKey(String),

    #[error("representative out of range: {0}")]
    Domain(String),

    #[error("t = {t} lies beyond the computed range t <= {t_max}")]
    BeyondTruncation { t: i64, t_max: i64 },

    #[error("division is not exact: remainder of size {remainder:e}")]
    InexactDivision { remainder: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    /// True for errors caused by unreadable input rather than by the mathematics.
    pub fn is_parse(&self) -> bool {
        matches!(self, Error::Parse(_))
    }
}
