use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no primes up to {limit}: the limit must be at least 2")]
    EmptyTable { limit: u64 },

    #[error("{function} is singular at {at}")]
    Singularity { function: &'static str, at: String },

    #[error("argument outside the domain of {function}: {detail}")]
    Domain { function: &'static str, detail: String },

    #[error("pole: {0}")]
    Pole(String),

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("ensemble has {size} elements, above the enumeration cap {cap}; use the product or spectral routes")]
    SizeCap { size: f64, cap: u64 },

    #[error("quadrature did not reach tolerance {requested:e} (estimated error {achieved:e})")]
    ToleranceNotMet { requested: f64, achieved: f64 },

    #[error("truncation tail bound {tail_bound:e} exceeds tolerance {tol:e}; increase R")]
    RTooSmall { tail_bound: f64, tol: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("u = {u} lies outside the computed grid [0, {u_max}]")]
    OutOfGrid { u: f64, u_max: f64 },

    #[error("u = {u} must exceed |alpha| = {modulus} for the Laurent expansion at infinity")]
    OutsideLaurentDomain { u: f64, modulus: f64 },

    #[error("unknown antiderivative case {0:?}")]
    UnknownCase(String),
}
