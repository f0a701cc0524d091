use thiserror::Error;

/// Errors raised by the numerical operations of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("map must be a polynomial for this operation")]
    NotPolynomial,

    #[error("degree {degree} is not supported here (need degree > 1)")]
    Degree { degree: usize },

    #[error("numerator and denominator share a root (|resultant| = {resultant:e})")]
    NotCoprime { resultant: f64 },

    #[error("atom budget exceeded: {needed} atoms requested, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: usize },

    #[error("root finder failed: {unresolved} of {degree} roots unresolved (max residual {residual:e}){context}")]
    RootFinding {
        degree: usize,
        unresolved: usize,
        residual: f64,
        context: String,
    },

    #[error("non-finite integrand value at sample {index}")]
    NonFiniteSample { index: u64 },

    #[error("{rejected} of {total} samples hit a singularity (limit is 0.1%)")]
    TooManyRejections { rejected: u64, total: u64 },

    #[error("pairing estimators disagree: {first} vs {second} (combined stderr {stderr:e})")]
    EstimatorDisagreement { first: f64, second: f64, stderr: f64 },

    #[error("the map has a finite exceptional point at {0}")]
    ExceptionalPoint(String),

    #[error("pole {0} is not inside the domain")]
    PoleOutsideDomain(String),

    #[error("domain closure must avoid the origin (inf |z| = {0:e})")]
    DomainTouchesOrigin(f64),

    #[error("grid solver did not converge: residual {residual:e} after {iterations} sweeps")]
    SolverDivergence { residual: f64, iterations: usize },

    #[error("component extraction failed: {0}")]
    Component(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
