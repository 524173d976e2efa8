//! Smooth sums over k-free integers whose prime factors do not exceed `N`.
//!
//! The crate computes, for an integer `k >= 2` and a complex weight `alpha`,
//! the sum
//!
//! ```text
//! S(k, alpha; N) = sum over k-free n with p | n => p <= N of f(log n / log N) * alpha^Omega(n) / n
//! ```
//!
//! by several independent routes: exact enumeration of the finite ensemble of
//! such integers, Euler products for its partition function and
//! characteristic function, and the limiting characteristic function of the
//! alpha-convolution of the Dickman distribution.  Support modules provide
//! complex special functions, adaptive quadrature and a prime sieve.

pub mod certificate;
pub mod cli;
pub mod dickman;
pub mod ensemble;
pub mod error;
pub mod error_terms;
pub mod primes;
pub mod quadrature;
pub mod smooth_sum;
pub mod specfun;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Library version embedded in every CLI artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
