//! Exponential integral, incomplete gamma for `a` in {0, -1}, cosine and
//! sine integrals, and the error function.
//!
//! Branches are principal throughout. `E1` is evaluated by its power series
//! near the origin and by the Legendre continued fraction elsewhere; `Ei`
//! is derived from `E1` off the positive real axis and summed directly on it.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::{Error, Result, EULER_GAMMA};

/// A computed value with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub value: Complex64,
    pub est_abs_error: f64,
}

impl EvalResult {
    fn new(value: Complex64, est_abs_error: f64) -> Self {
        EvalResult { value, est_abs_error }
    }

    fn real(value: f64, est_abs_error: f64) -> Self {
        EvalResult { value: Complex64::new(value, 0.0), est_abs_error }
    }

    pub fn re(&self) -> f64 {
        self.value.re
    }
}

const EPS: f64 = f64::EPSILON;
const SERIES_RADIUS: f64 = 8.0;
const MAX_TERMS: usize = 20_000;

fn singular(function: &'static str, z: Complex64) -> Error {
    Error::Singularity { function, at: format!("{z}") }
}

/// `sum_{n>=1} (-z)^n / (n n!)`, with the sum of term moduli.
fn e1_series_tail(z: Complex64) -> (Complex64, f64) {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut mass = 0.0;
    for n in 1..MAX_TERMS {
        term *= -z / n as f64;
        let contribution = term / n as f64;
        sum += contribution;
        mass += contribution.norm();
        if contribution.norm() <= EPS * sum.norm() * 0.1 {
            break;
        }
    }
    (sum, mass)
}

/// Continued fraction for `Gamma(a, z)`, `a <= 0`, by modified Lentz.
///
/// `Gamma(a, z) = e^{-z} z^a / (b0 + a1 / (b1 + a2 / (b2 + ...)))` with
/// `b_n = z + 2n + 1 - a` and `a_n = -n (n - a)`.
fn legendre_cf(a: f64, z: Complex64) -> (Complex64, f64) {
    let tiny = 1e-300;
    let b0 = z + (1.0 - a);
    let mut f = if b0.norm() == 0.0 { Complex64::new(tiny, 0.0) } else { b0 };
    let mut c = f;
    let mut d = Complex64::new(0.0, 0.0);
    let mut last_delta = 1.0;
    for n in 1..MAX_TERMS {
        let nf = n as f64;
        let an = -nf * (nf - a);
        let bn = z + (2.0 * nf + 1.0 - a);
        d = bn + d * an;
        if d.norm() == 0.0 {
            d = Complex64::new(tiny, 0.0);
        }
        c = bn + an / c;
        if c.norm() == 0.0 {
            c = Complex64::new(tiny, 0.0);
        }
        d = d.inv();
        let delta = c * d;
        f *= delta;
        last_delta = (delta - 1.0).norm();
        if last_delta < EPS {
            break;
        }
    }
    let value = (-z).exp() * z.powf(a) / f;
    (value, value.norm() * (last_delta + 16.0 * EPS))
}

fn use_series(z: Complex64) -> bool {
    let r = z.norm();
    // beyond the radius, keep the series only where it suffers no
    // cancellation: near the negative real axis the result is itself large
    r <= 2.0 || (r <= SERIES_RADIUS && z.re <= 2.0) || (r < 700.0 && r + z.re < 10.0)
}

fn e1_raw(z: Complex64) -> (Complex64, f64) {
    if use_series(z) {
        let (tail, mass) = e1_series_tail(z);
        let value = -EULER_GAMMA - z.ln() - tail;
        let err = 4.0 * EPS * (mass + EULER_GAMMA + z.ln().norm() + value.norm());
        (value, err)
    } else {
        legendre_cf(0.0, z)
    }
}

/// Exponential integral `E1(z) = Gamma(0, z)` on the principal branch.
pub fn exp_integral_e1(z: Complex64) -> Result<EvalResult> {
    if z.norm() == 0.0 {
        return Err(singular("E1", z));
    }
    let (value, err) = e1_raw(z);
    Ok(EvalResult::new(value, err))
}

/// Exponential integral `Ei(z)`: the principal value on the real axis and its
/// analytic continuation `Ei(z) = -E1(-z) + i pi sign(Im z)` elsewhere.
pub fn exp_integral_ei(z: Complex64) -> Result<EvalResult> {
    if z.norm() == 0.0 {
        return Err(singular("Ei", z));
    }
    if z.im == 0.0 && z.re > 0.0 {
        let (value, err) = ei_positive_real(z.re);
        return Ok(EvalResult::real(value, err));
    }
    let (e1, err) = e1_raw(-z);
    let shift = if z.im > 0.0 {
        Complex64::new(0.0, PI)
    } else if z.im < 0.0 {
        Complex64::new(0.0, -PI)
    } else {
        Complex64::new(0.0, 0.0)
    };
    let mut value = -e1 + shift;
    if z.im == 0.0 {
        // real negative argument: Ei is real
        value.im = 0.0;
    }
    Ok(EvalResult::new(value, err))
}

/// `Ei(x) = gamma + ln x + sum x^n / (n n!)` for `x > 0`; every term is
/// positive so the series is stable for any representable result.
fn ei_positive_real(x: f64) -> (f64, f64) {
    let mut term = 1.0;
    let mut sum = 0.0;
    for n in 1..MAX_TERMS {
        term *= x / n as f64;
        let contribution = term / n as f64;
        sum += contribution;
        if contribution <= EPS * sum * 0.1 {
            break;
        }
    }
    let value = EULER_GAMMA + x.ln() + sum;
    let mass = sum + EULER_GAMMA + x.ln().abs();
    (value, 4.0 * EPS * mass * (1.0 + x.sqrt()))
}

/// Upper incomplete gamma `Gamma(a, z)` for `a` in {0, -1}, principal branch.
pub fn upper_gamma(a: i32, z: Complex64) -> Result<EvalResult> {
    if z.norm() == 0.0 {
        return Err(singular("Gamma(a, z)", z));
    }
    match a {
        0 => exp_integral_e1(z),
        -1 => {
            if use_series(z) {
                Ok(gamma_minus_one_series(z))
            } else {
                let (value, err) = legendre_cf(-1.0, z);
                Ok(EvalResult::new(value, err))
            }
        }
        _ => Err(Error::Domain {
            function: "Gamma(a, z)",
            detail: format!("a = {a}; only a = 0 and a = -1 are supported"),
        }),
    }
}

/// `Gamma(-1, z) = 1/z + gamma - 1 + ln z + sum_{m>=1} (-z)^m / (m (m+1)!)`.
fn gamma_minus_one_series(z: Complex64) -> EvalResult {
    let mut power = Complex64::new(1.0, 0.0); // (-z)^m / (m+1)!
    let mut sum = Complex64::new(0.0, 0.0);
    let mut mass = 0.0;
    for m in 1..MAX_TERMS {
        power *= -z / (m + 1) as f64;
        let contribution = power / m as f64;
        sum += contribution;
        mass += contribution.norm();
        if contribution.norm() <= EPS * sum.norm() * 0.1 {
            break;
        }
    }
    let head = z.inv() + (EULER_GAMMA - 1.0) + z.ln();
    let value = head + sum;
    let err = 4.0 * EPS * (mass + head.norm() + value.norm());
    EvalResult::new(value, err)
}

/// `(Ci(x), Si(x))` for `x > 0`.
pub(crate) fn ci_si(x: f64) -> (f64, f64) {
    if x <= 4.0 {
        let (cin, si) = cin_si_series(x);
        (EULER_GAMMA + x.ln() - cin, si)
    } else {
        // E1(ix) = -Ci(x) + i (Si(x) - pi/2)
        let (e1, _) = legendre_cf(0.0, Complex64::new(0.0, x));
        (-e1.re, e1.im + FRAC_PI_2)
    }
}

/// `Cin(x) = sum_{n>=1} (-1)^{n+1} x^{2n} / (2n (2n)!)` and `Si(x)` by
/// their power series.
fn cin_si_series(x: f64) -> (f64, f64) {
    let x2 = x * x;
    let mut cin = 0.0;
    let mut si = x;
    let mut term = x; // x^m / m!
    let mut m = 1usize;
    loop {
        term *= x / (m + 1) as f64;
        let even = m + 1; // x^even / even!
        let sign = if (even / 2) % 2 == 1 { 1.0 } else { -1.0 };
        cin += sign * term / even as f64;
        term *= x / (m + 2) as f64;
        let odd = m + 2;
        si -= sign * term / odd as f64;
        m += 2;
        if term.abs() < EPS * 1e-3 * x2.max(1e-300) || m > 200 {
            break;
        }
    }
    (cin, si)
}

/// Cosine integral `Ci(x) = -int_x^inf cos t / t dt` for `x > 0`.
pub fn cosine_integral(x: f64) -> Result<EvalResult> {
    if x <= 0.0 || x.is_nan() {
        return Err(Error::Domain { function: "Ci", detail: format!("x = {x} must be positive") });
    }
    let (ci, _) = ci_si(x);
    Ok(EvalResult::real(ci, 8.0 * EPS * (1.0 + ci.abs() + x.ln().abs())))
}

/// Sine integral `Si(x) = int_0^x sin t / t dt`.
pub fn sine_integral(x: f64) -> Result<EvalResult> {
    if x.is_nan() {
        return Err(Error::Domain { function: "Si", detail: "x is NaN".into() });
    }
    if x == 0.0 {
        return Ok(EvalResult::real(0.0, 0.0));
    }
    let (_, si) = ci_si(x.abs());
    Ok(EvalResult::real(si.copysign(x), 8.0 * EPS * (1.0 + si.abs())))
}

/// Entire cosine integral `Cin(x) = int_0^x (1 - cos t) / t dt
/// = gamma + ln|x| - Ci(|x|)`, even in `x`.
pub fn cin(x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        0.0
    } else if x <= 4.0 {
        cin_si_series(x).0
    } else {
        EULER_GAMMA + x.ln() - ci_si(x).0
    }
}

/// Error function.
pub fn erf(x: f64) -> EvalResult {
    let value = libm::erf(x);
    EvalResult::real(value, 4.0 * EPS * value.abs().max(EPS))
}

/// Complementary error function.
pub fn erfc(x: f64) -> EvalResult {
    let value = libm::erfc(x);
    EvalResult::real(value, 4.0 * EPS * value.abs())
}

/// Real gamma function.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}
