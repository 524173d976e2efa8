//! Certified lower bound `|int_{|lambda|<=r} f^ phi^(-1)| >= 3/100` for the
//! bump `e^(-1/(1-u^2))`, by a midpoint rule on `[-r, r]` with an explicit
//! second-derivative error term and an `erfc` tail bound.
//!
//! The reference chain evaluates the midpoint sum with the plain transform
//! `int f(u) e^(-i lambda u) du` while its tail bound comes from the
//! envelope of the `1/2pi`-normalized transform with `|phi^(-1)| <= e^gamma`.
//! [`reproduce_example`] reproduces that chain exactly and also reports the
//! chain under one consistent convention, which does not close at `r = 5`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::smooth_sum::{bump_decay_envelope, bump_transform, bump_value};
use crate::{quadrature, specfun, Error, Result, EULER_GAMMA};

/// Which Fourier normalization the integrand uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `int f(u) e^(-i lambda u) du`.
    Plain,
    /// `(1/2pi) int f(u) e^(-i lambda u) du`.
    Normalized,
}

impl Convention {
    fn scale(self) -> f64 {
        match self {
            Convention::Plain => TAU,
            Convention::Normalized => 1.0,
        }
    }
}

const TRANSFORM_TOL: f64 = 1e-13;

/// `Re phi^(-1)(lambda) = e^Cin(lambda) cos Si(lambda)`, which equals
/// `e^(gamma - Ci(lambda)) lambda cos Si(lambda)` for `lambda > 0`.
pub fn re_inverse_charfn(lambda: f64) -> f64 {
    let l = lambda.abs();
    let si = specfun::sine_integral(l).map(|s| s.re()).unwrap_or(0.0);
    specfun::cin(l).exp() * si.cos()
}

/// `F(lambda) = f^(lambda) Re phi^(-1)(lambda)`, even in `lambda`.
pub fn integrand_f(lambda: f64, convention: Convention) -> Result<f64> {
    let l = lambda.abs();
    Ok(convention.scale() * bump_transform(l, TRANSFORM_TOL)? * re_inverse_charfn(l))
}

/// The computed chain for one convention.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chain {
    pub convention: Convention,
    /// `2h sum_m F(h(m - 1/2))`, the midpoint rule on `[-r, r]`.
    pub midpoint_sum: f64,
    /// `(2r) h^2 / 24` times the assumed `max|F''| <= 1/2`.
    pub quadrature_bound: f64,
    pub tail_bound: f64,
    pub lower_bound: f64,
    pub pass: bool,
}

/// Everything [`reproduce_example`] computes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleReport {
    pub r: f64,
    pub m: usize,
    pub h: f64,
    /// `h^2 r / 24`, the bound used in the chain.
    pub quadrature_bound: f64,
    /// `h^2 r / 48`, the half-interval form.
    pub quadrature_bound_half: f64,
    /// `(6 e^gamma / sqrt(pi)) erfc(r^(1/4))`.
    pub tail_bound: f64,
    /// Allowance for the imaginary part.
    pub imaginary_margin: f64,
    /// `3/100 + imaginary_margin`.
    pub target: f64,
    /// The reference chain: plain midpoint sum against the tail above.
    pub reference: Chain,
    /// Normalized midpoint sum with a tail that keeps the growth of
    /// `|phi^(-1)(lambda)| ~ e^gamma lambda`.
    pub consistent: Chain,
    /// Largest `|F''|` seen by second differences on `[0, r]`, plain convention.
    pub max_second_derivative: f64,
    pub second_derivative_ok: bool,
    /// Pass flag of the reference chain.
    pub pass: bool,
}

pub const IMAGINARY_MARGIN: f64 = 1.0 / 2500.0;
pub const TARGET: f64 = 3.0 / 100.0;

/// `(6 e^gamma / sqrt(pi)) erfc(r^(1/4))`.
pub fn tail_bound(r: f64) -> f64 {
    6.0 * EULER_GAMMA.exp() / PI.sqrt() * specfun::erfc(r.powf(0.25)).re()
}

/// `2 (3/2pi) e^(gamma + c) int_r^inf e^-sqrt(lambda) lambda^(1/4) dlambda`
/// with `c >= sup_{lambda >= r} -Ci(lambda)` estimated on a grid.
pub fn tail_bound_with_growth(r: f64) -> f64 {
    let s0 = r.powf(0.25);
    let moment = (s0.powi(3) / 2.0 + 0.75 * s0) * (-s0 * s0).exp() + 3.0 * PI.sqrt() / 8.0 * specfun::erfc(s0).re();
    let mut c = 1.0 / 1000.0f64.max(r);
    let mut l = r;
    while l < 1000.0 {
        let (ci, _) = specfun::ci_si(l);
        c = c.max(-ci);
        l += 0.01;
    }
    2.0 * 3.0 / TAU * (EULER_GAMMA + c).exp() * 4.0 * moment
}

fn midpoint_values(r: f64, m: usize, convention: Convention) -> Result<Vec<f64>> {
    let h = r / m as f64;
    (1..=m).into_par_iter().map(|i| integrand_f(h * (i as f64 - 0.5), convention)).collect()
}

/// Midpoint approximation of `int_{-r}^{r} F`.
pub fn midpoint_sum(r: f64, m: usize, convention: Convention) -> Result<f64> {
    let h = r / m as f64;
    Ok(2.0 * h * midpoint_values(r, m, convention)?.iter().sum::<f64>())
}

/// `max |F''|` by central second differences with the given step on `[0, r]`.
pub fn max_second_derivative(r: f64, step: f64, convention: Convention) -> Result<f64> {
    let n = (r / step).round() as usize;
    let values: Vec<f64> = (0..=n + 1)
        .into_par_iter()
        .map(|i| integrand_f(i as f64 * step, convention))
        .collect::<Result<_>>()?;
    let mut best = 0.0f64;
    for i in 0..=n {
        let left = if i == 0 { values[1] } else { values[i - 1] };
        best = best.max(((left - 2.0 * values[i] + values[i + 1]) / (step * step)).abs());
    }
    Ok(best)
}

pub fn reproduce_example(r: f64, m: usize) -> Result<ExampleReport> {
    if !(r > 0.0) || m == 0 {
        return Err(Error::Precondition(format!("need r > 0 and M >= 1, got r = {r}, M = {m}")));
    }
    let h = r / m as f64;
    let quadrature_bound = h * h * r / 24.0;
    let tail = tail_bound(r);
    let target = TARGET + IMAGINARY_MARGIN;

    let plain = midpoint_sum(r, m, Convention::Plain)?;
    let lower = plain.abs() - quadrature_bound - tail;
    let reference = Chain {
        convention: Convention::Plain,
        midpoint_sum: plain,
        quadrature_bound,
        tail_bound: tail,
        lower_bound: lower,
        pass: lower >= target,
    };

    let normalized = plain / TAU;
    let consistent_tail = tail_bound_with_growth(r);
    let consistent_quad = quadrature_bound / TAU;
    let consistent_lower = normalized.abs() - consistent_quad - consistent_tail;
    let consistent = Chain {
        convention: Convention::Normalized,
        midpoint_sum: normalized,
        quadrature_bound: consistent_quad,
        tail_bound: consistent_tail,
        lower_bound: consistent_lower,
        pass: consistent_lower >= target,
    };

    let f2 = max_second_derivative(r, 1e-3, Convention::Plain)?;
    Ok(ExampleReport {
        r,
        m,
        h,
        quadrature_bound,
        quadrature_bound_half: h * h * r / 48.0,
        tail_bound: tail,
        imaginary_margin: IMAGINARY_MARGIN,
        target,
        pass: reference.pass,
        reference,
        consistent,
        max_second_derivative: f2,
        second_derivative_ok: f2 <= 0.5,
    })
}

/// `lambda,F` rows on `[0, r]` with the given step.
pub fn write_integrand_csv<W: Write>(mut out: W, r: f64, step: f64, convention: Convention) -> Result<()> {
    let io = |e: std::io::Error| Error::Precondition(format!("write failed: {e}"));
    let n = (r / step).round() as usize;
    writeln!(out, "lambda,F").map_err(io)?;
    let values: Vec<f64> =
        (0..=n).into_par_iter().map(|i| integrand_f(i as f64 * step, convention)).collect::<Result<_>>()?;
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{:.16e},{v:.16e}", i as f64 * step).map_err(io)?;
    }
    Ok(())
}

/// Stationary-phase form of the normalized bump transform,
/// `(1/pi) Re{ sqrt(-i pi / (sqrt(2i) lambda^(3/2))) e^(i lambda - 1/4 - sqrt(2 i lambda)) }`.
pub fn bump_transform_asymptotic(lambda: f64) -> f64 {
    let i = Complex64::i();
    let sqrt_2i = (2.0 * i).sqrt();
    let amp = (-i * PI / (sqrt_2i * lambda.powf(1.5))).sqrt();
    let phase = (i * lambda - 0.25 - (2.0 * i * lambda).sqrt()).exp();
    (amp * phase).re / PI
}

/// Per-window ratio of `sup |f^|` to `sup |asymptotic|` over `[lo, hi]`.
/// Windows avoid comparing near the zeros of either function.
pub fn stationary_phase_ratios(lo: f64, hi: f64, window: f64, samples: usize) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut a = lo;
    while a < hi - 1e-12 {
        let b = (a + window).min(hi);
        let (mut direct, mut asym) = (0.0f64, 0.0f64);
        for s in 0..=samples {
            let l = a + (b - a) * s as f64 / samples as f64;
            direct = direct.max(bump_transform(l, TRANSFORM_TOL)?.abs());
            asym = asym.max(bump_transform_asymptotic(l).abs());
        }
        out.push((a, direct / asym));
        a = b;
    }
    Ok(out)
}

/// `|f^(lambda)|` against the decay envelope on the sampled points; returns
/// the largest ratio.
pub fn envelope_ratio(lambdas: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &l in lambdas {
        worst = worst.max(bump_transform(l, TRANSFORM_TOL)?.abs() / bump_decay_envelope(l));
    }
    Ok(worst)
}

/// `int_{-1}^{1}` of the bump, a cross-check for `2 pi f^(0)`.
pub fn bump_mass() -> Result<f64> {
    Ok(quadrature::integrate_real(bump_value, -1.0, 1.0, &quadrature::Options::with_tol(1e-15, 1e-15))?.0)
}
