//! Generalized Dickman function `rho_alpha`, the density of the
//! alpha-convolution of the Dickman distribution, its characteristic
//! function, and the Selberg constant `H(alpha)` used as the plateau value.
//!
//! The delay equation is `-u^a rho'(u) = a (u-1)^(a-1) rho(u-1)` with
//! `rho = a0` on `[0, 1]`. On `[1, 2]` it is solved in closed form; beyond
//! that it is marched cell by cell with three-point Gauss–Legendre and a
//! Hermite cubic interpolant of the already-computed history.

use std::io::Write;

use num_complex::Complex64;

use crate::{primes, quadrature, specfun, Error, Result, EULER_GAMMA};

/// Prime limit used for `H(alpha)` when none is given.
pub const DEFAULT_PRIME_LIMIT: u64 = 10_000_000;

/// Default marching step.
pub const DEFAULT_STEP: f64 = 1e-3;

/// `H(alpha) = Gamma(alpha)^-1 prod_p (1 - alpha/p)^-1 (1 - 1/p)^alpha`,
/// truncated at `prime_limit`.
///
/// Each log-factor is `sum_m (alpha^m - alpha) / (m p^m)`, so the primes
/// above the limit contribute about `(alpha^2 - alpha) / (2 L ln L)`; that
/// tail is added back.
pub fn h_constant(alpha: f64, prime_limit: u64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain { function: "H", detail: format!("alpha = {alpha} must be positive") });
    }
    if prime_limit < 2 {
        return Err(Error::EmptyTable { limit: prime_limit });
    }
    let table = primes::shared(prime_limit)?;
    let ps = table.up_to(prime_limit);
    if alpha.fract() == 0.0 && table.contains(alpha as u64) && (alpha as u64) <= prime_limit {
        return Err(Error::Pole(format!("H(alpha) has a pole at the prime alpha = {alpha}")));
    }
    let mut log_sum = 0.0;
    let mut sign = 1.0;
    for &p in ps {
        let p = p as f64;
        let a = 1.0 - alpha / p;
        if a < 0.0 {
            sign = -sign;
        }
        let lead = if a > 0.0 { (-alpha / p).ln_1p() } else { a.abs().ln() };
        log_sum += -lead + alpha * (-1.0 / p).ln_1p();
    }
    let l = prime_limit as f64;
    log_sum += (alpha * alpha - alpha) / (2.0 * l * l.ln());
    Ok(sign * log_sum.exp() / specfun::gamma(alpha))
}

/// Solution of the delay equation on a uniform grid `u_i = i h`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoGrid {
    pub alpha: f64,
    pub step: f64,
    pub u_max: f64,
    pub a0: f64,
    /// `rho(i h)` for `i = 0..=n`.
    pub values: Vec<f64>,
    /// `rho'(i h)`, zero on the plateau.
    slopes: Vec<f64>,
}

/// Closed form on `[1, 2]`: `rho = a0 (1 - a sum_n X^(n+a) / (n+a))` with
/// `X = 1 - 1/u`.
fn rho_first_segment(alpha: f64, a0: f64, u: f64) -> f64 {
    let x = 1.0 - 1.0 / u;
    if x <= 0.0 {
        return a0;
    }
    let mut power = x.powf(alpha);
    let mut sum = 0.0;
    for n in 0..400 {
        let term = power / (n as f64 + alpha);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        power *= x;
    }
    a0 * (1.0 - alpha * sum)
}

impl RhoGrid {
    fn index_count(&self) -> usize {
        self.values.len()
    }

    /// `rho(u)` for `0 <= u <= u_max`.
    pub fn rho(&self, u: f64) -> Result<f64> {
        if u > self.u_max * (1.0 + 1e-14) {
            return Err(Error::OutOfGrid { u, u_max: self.u_max });
        }
        Ok(self.rho_unchecked(u))
    }

    fn rho_unchecked(&self, u: f64) -> f64 {
        if u <= 1.0 {
            return self.a0;
        }
        if u <= 2.0 {
            return rho_first_segment(self.alpha, self.a0, u);
        }
        let pos = u / self.step;
        let i = (pos.floor() as usize).min(self.index_count() - 2);
        let t = pos - i as f64;
        hermite(self.values[i], self.values[i + 1], self.slopes[i], self.slopes[i + 1], self.step, t)
    }

    /// Right-hand side `rho'(u) = -a (u-1)^(a-1) rho(u-1) u^-a` for `u > 1`.
    fn derivative(&self, u: f64) -> f64 {
        let a = self.alpha;
        -a * (u - 1.0).powf(a - 1.0) * self.rho_unchecked(u - 1.0) * u.powf(-a)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (i as f64 * self.step, v))
    }

    /// Writes `u,rho,w` rows for every grid node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "u,rho,w")?;
        for (u, rho) in self.nodes() {
            let w = w_density(self.alpha, u, self).unwrap_or(f64::NAN);
            writeln!(out, "{u:.16e},{rho:.16e},{w:.16e}")?;
        }
        Ok(())
    }
}

fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Marches the delay equation up to `u_max` with the plateau `a0 = H(alpha)`.
pub fn solve_rho(alpha: f64, u_max: f64, step: f64) -> Result<RhoGrid> {
    if !(alpha > 0.0) {
        return Err(Error::Domain {
            function: "solve_rho",
            detail: format!("alpha = {alpha}; the delay equation is solved for real alpha > 0 only"),
        });
    }
    let a0 = h_constant(alpha, DEFAULT_PRIME_LIMIT)?;
    solve_rho_with_plateau(alpha, a0, u_max, step)
}

/// As [`solve_rho`] with an explicit plateau value.
pub fn solve_rho_with_plateau(alpha: f64, a0: f64, u_max: f64, step: f64) -> Result<RhoGrid> {
    if !(alpha > 0.0) {
        return Err(Error::Domain { function: "solve_rho", detail: format!("alpha = {alpha} must be positive") });
    }
    if !(step > 0.0 && step <= 1e-3) {
        return Err(Error::Precondition(format!("step = {step} must lie in (0, 1e-3]")));
    }
    if !(u_max >= 1.0) {
        return Err(Error::Precondition(format!("u_max = {u_max} must be at least 1")));
    }
    // snap the step so that integers fall on the grid
    let per_unit = (1.0 / step).round() as usize;
    let h = 1.0 / per_unit as f64;
    let n = (u_max * per_unit as f64).ceil() as usize;
    let mut grid = RhoGrid {
        alpha,
        step: h,
        u_max: n as f64 * h,
        a0,
        values: vec![a0; n + 1],
        slopes: vec![0.0; n + 1],
    };
    let two = (2 * per_unit).min(n);
    for i in per_unit..=two {
        let u = i as f64 * h;
        grid.values[i] = rho_first_segment(alpha, a0, u);
        if i > per_unit {
            grid.slopes[i] = grid.derivative(u);
        }
    }
    let (gx, gw) = quadrature::gauss_legendre(3);
    for i in two + 1..=n {
        let lo = (i - 1) as f64 * h;
        let mut increment = 0.0;
        for (x, w) in gx.iter().zip(&gw) {
            let s = lo + 0.5 * h * (1.0 + x);
            increment += w * grid.derivative(s);
        }
        grid.values[i] = grid.values[i - 1] + 0.5 * h * increment;
        grid.slopes[i] = grid.derivative(i as f64 * h);
    }
    Ok(grid)
}

/// Normalizing constant of the density: `e^(-alpha gamma) / (Gamma(alpha) a0)`.
fn density_scale(alpha: f64, a0: f64) -> f64 {
    (-alpha * EULER_GAMMA).exp() / (specfun::gamma(alpha) * a0)
}

/// Density `w_alpha(u) = e^(-alpha gamma) / Gamma(alpha) u^(alpha-1) rho(u) / a0`.
///
/// Dividing by the plateau makes the density independent of the choice of
/// `a0`, and the constant `e^(-alpha gamma)` makes it integrate to one.
pub fn w_density(alpha: f64, u: f64, grid: &RhoGrid) -> Result<f64> {
    if alpha != grid.alpha {
        return Err(Error::Precondition(format!(
            "grid was solved for alpha = {}, not {alpha}",
            grid.alpha
        )));
    }
    if u < 0.0 {
        return Ok(0.0);
    }
    let rho = grid.rho(u)?;
    Ok(density_scale(alpha, grid.a0) * u.powf(alpha - 1.0) * rho)
}

/// `int_0^u_max e^(i lambda u) w_alpha(u) du`.
///
/// On `[0, 1]` the substitution `s = u^alpha` absorbs the weight
/// `u^(alpha-1)`; beyond 1 each grid cell gets a four-point Gauss rule,
/// which is exact for the cubic interpolant up to the smooth factor.
pub fn density_transform(grid: &RhoGrid, lambda: f64) -> Result<Complex64> {
    let alpha = grid.alpha;
    let opts = quadrature::Options::with_tol(1e-14, 1e-13).oscillatory(0.0, 1.0, lambda);
    let head = quadrature::integrate(
        |s| Complex64::new(0.0, lambda * s.powf(1.0 / alpha)).exp(),
        0.0,
        1.0,
        &opts,
    )?
    .value
        * (grid.a0 / alpha);
    let (gx, gw) = quadrature::gauss_legendre(4);
    let h = grid.step;
    let first = (1.0 / h).round() as usize;
    let mut body = Complex64::new(0.0, 0.0);
    for i in first..grid.values.len() - 1 {
        let lo = i as f64 * h;
        for (x, w) in gx.iter().zip(&gw) {
            let u = lo + 0.5 * h * (1.0 + x);
            body += Complex64::new(0.0, lambda * u).exp() * (w * u.powf(alpha - 1.0) * grid.rho_unchecked(u));
        }
    }
    Ok((head + body * (0.5 * h)) * density_scale(alpha, grid.a0))
}

/// Limiting characteristic function `exp(alpha int_0^1 (e^(i lambda v) - 1) / v dv)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharFnLimit {
    pub alpha: Complex64,
}

impl CharFnLimit {
    pub fn new(alpha: Complex64) -> Self {
        CharFnLimit { alpha }
    }

    /// The exponent `int_0^1 (e^(i lambda v) - 1) / v dv = -Cin(|lambda|)
    /// + i sign(lambda) Si(|lambda|)`.
    pub fn exponent(lambda: f64) -> Complex64 {
        if lambda == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let x = lambda.abs();
        let si = specfun::ci_si(x).1;
        Complex64::new(-specfun::cin(x), si.copysign(lambda))
    }

    pub fn eval(&self, lambda: f64) -> Complex64 {
        if lambda == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        (self.alpha * Self::exponent(lambda)).exp()
    }
}

pub fn charfn_limit(alpha: Complex64, lambda: f64) -> Complex64 {
    CharFnLimit::new(alpha).eval(lambda)
}
