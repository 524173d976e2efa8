//! Error terms of the characteristic-function expansion: the main
//! logarithmic term, closed-form antiderivatives of the remainder integrals
//! (in `x = log u`, with `eps = lambda / log N`), envelope scans and the
//! Abel-summation boundary terms.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dickman::CharFnLimit;
use crate::ensemble::{self, EnsembleConfig};
use crate::{primes, quadrature, specfun, Error, Result};

/// `alpha int_{log d*/log N}^{1} (e^(i lambda v) - 1) / v dv`.
pub fn main_term_j111(cfg: &EnsembleConfig, lambda: f64, d_star: u64) -> Result<Complex64> {
    if !((d_star as f64) > cfg.alpha.norm()) || cfg.n < d_star {
        return Err(Error::Precondition(format!(
            "need |alpha| < d* <= N, got d* = {d_star}, |alpha| = {}, N = {}",
            cfg.alpha.norm(),
            cfg.n
        )));
    }
    main_term_j111_log(cfg.alpha, lambda, (d_star as f64).ln(), (cfg.n as f64).ln())
}

/// [`main_term_j111`] with `log d*` and `log N` given directly, so that
/// `N` may exceed the integer range.
pub fn main_term_j111_log(alpha: Complex64, lambda: f64, log_d: f64, log_n: f64) -> Result<Complex64> {
    if lambda == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let lower = log_d / log_n;
    let opts = quadrature::Options::with_tol(1e-14, 1e-13).oscillatory(lower, 1.0, lambda);
    let r = quadrature::integrate(|v| ensemble::expm1_i(lambda * v) / v, lower, 1.0, &opts)?;
    Ok(alpha * r.value)
}

/// `alpha int_0^1 (e^(i lambda v) - 1) / v dv = alpha (-Cin(lambda) + i Si(lambda))`.
pub fn main_term_j111_limit(alpha: Complex64, lambda: f64) -> Complex64 {
    alpha * CharFnLimit::exponent(lambda)
}

/// Identifies a remainder integral by its integrand (in `x = log u`):
///
/// | case | integrand |
/// |---|---|
/// | 2,1,1 | `(e^(i eps x) - 1) / x^2` |
/// | 1,1,j | `(e^(i eps (j-2) x) - 1) e^(-(j-2) x) / x` |
/// | 1,2,j | `(e^(i eps x) - 1)(e^(i eps (j-2) x) - 1) e^(-(j-1) x) / x` |
/// | 1,3,j | `(e^(i eps (j-2) x) - 1) e^(-j x) / x` |
/// | 1,2,1 | `(e^(i eps x) - 1)^2 e^(-x) / x` |
/// | 2,1,j | `(e^(i eps (j-2) x) - 1) e^(-(j-2) x) / x^2` |
/// | 2,2,j | `(e^(i eps x) - 1)(e^(i eps (j-2) x) - 1) e^(-(j-1) x) / x^2` |
/// | 2,3,j | `(e^(i eps (j-2) x) - 1) e^(-j x) / x^2` |
/// | 1,3,1 | `(e^(i eps x) - 1) e^(-2x) / x` |
/// | 2,2,1 | `(e^(i eps x) - 1)^2 e^(-x) / x^2` |
/// | 2,3,1 | `(e^(i eps x) - 1) e^(-2x) / x^2` |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CaseId {
    J211,
    J11j,
    J12j,
    J13j,
    J121,
    J21j,
    J22j,
    J23j,
    J131,
    J221,
    J231,
}

impl CaseId {
    pub const ALL: [CaseId; 11] = [
        CaseId::J211,
        CaseId::J11j,
        CaseId::J12j,
        CaseId::J13j,
        CaseId::J121,
        CaseId::J21j,
        CaseId::J22j,
        CaseId::J23j,
        CaseId::J131,
        CaseId::J221,
        CaseId::J231,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseId::J211 => "J2,1,1",
            CaseId::J11j => "J1,1,j",
            CaseId::J12j => "J1,2,j",
            CaseId::J13j => "J1,3,j",
            CaseId::J121 => "J1,2,1",
            CaseId::J21j => "J2,1,j",
            CaseId::J22j => "J2,2,j",
            CaseId::J23j => "J2,3,j",
            CaseId::J131 => "J1,3,1",
            CaseId::J221 => "J2,2,1",
            CaseId::J231 => "J2,3,1",
        }
    }

    /// Whether the case carries the index `3 <= j <= k + 1`.
    pub fn has_j(self) -> bool {
        matches!(self, CaseId::J11j | CaseId::J12j | CaseId::J13j | CaseId::J21j | CaseId::J22j | CaseId::J23j)
    }

    /// Where the reference label disagrees with the integrand it names.
    pub fn label_note(self) -> Option<&'static str> {
        match self {
            CaseId::J231 => Some("the defining line cites the antiderivative of J2,2,1; the J2,3,1 form is the one that matches"),
            CaseId::J221 => Some("its conclusion line is labelled J1,2,2"),
            _ => None,
        }
    }

    /// Order of the `eps` term: 2 for the squared-oscillation cases.
    pub fn eps_order(self) -> u32 {
        match self {
            CaseId::J22j | CaseId::J121 | CaseId::J221 => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| !matches!(c, ' ' | '_' | '{' | '}' | '~')).collect();
        let key = key.trim_start_matches(['J', 'j']);
        CaseId::ALL
            .into_iter()
            .find(|c| c.name().trim_start_matches('J') == key || c.name().trim_start_matches('J').replace(',', "") == key)
            .ok_or_else(|| Error::UnknownCase(s.to_string()))
    }
}

/// One antiderivative with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AntiderivativeCase {
    pub id: CaseId,
    /// Ignored unless [`CaseId::has_j`].
    pub j: u32,
    pub eps: f64,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn gamma0(z: Complex64) -> Result<Complex64> {
    Ok(specfun::upper_gamma(0, z)?.value)
}

fn gamma_m1(z: Complex64) -> Result<Complex64> {
    Ok(specfun::upper_gamma(-1, z)?.value)
}

fn ei(z: Complex64) -> Result<Complex64> {
    Ok(specfun::exp_integral_ei(z)?.value)
}

/// `int e^(-c x) / x^2 dx = -e^(-c x) / x - c Ei(-c x)`.
fn inverse_square_antiderivative(rate: Complex64, x: f64) -> Result<Complex64> {
    Ok(-(-rate * x).exp() / x - rate * ei(-rate * x)?)
}

impl AntiderivativeCase {
    pub fn new(id: CaseId, j: u32, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::Precondition(format!("eps = {eps} must be non-negative")));
        }
        if id.has_j() && j < 3 {
            return Err(Error::Precondition(format!("case {id} needs j >= 3, got {j}")));
        }
        Ok(AntiderivativeCase { id, j: if id.has_j() { j } else { 0 }, eps })
    }

    pub fn label(&self) -> String {
        if self.id.has_j() {
            self.id.name().replace('j', &self.j.to_string())
        } else {
            self.id.name().to_string()
        }
    }

    pub fn integrand(&self, x: f64) -> Complex64 {
        let e = self.eps;
        let j = self.j as f64;
        let osc = |m: f64| ensemble::expm1_i(m * e * x);
        match self.id {
            CaseId::J211 => osc(1.0) / (x * x),
            CaseId::J11j => osc(j - 2.0) * (-(j - 2.0) * x).exp() / x,
            CaseId::J12j => osc(1.0) * osc(j - 2.0) * (-(j - 1.0) * x).exp() / x,
            CaseId::J13j => osc(j - 2.0) * (-j * x).exp() / x,
            CaseId::J121 => osc(1.0) * osc(1.0) * (-x).exp() / x,
            CaseId::J21j => osc(j - 2.0) * (-(j - 2.0) * x).exp() / (x * x),
            CaseId::J22j => osc(1.0) * osc(j - 2.0) * (-(j - 1.0) * x).exp() / (x * x),
            CaseId::J23j => osc(j - 2.0) * (-j * x).exp() / (x * x),
            CaseId::J131 => osc(1.0) * (-2.0 * x).exp() / x,
            CaseId::J221 => osc(1.0) * osc(1.0) * (-x).exp() / (x * x),
            CaseId::J231 => osc(1.0) * (-2.0 * x).exp() / (x * x),
        }
    }

    /// The closed form, defined up to an additive constant.
    pub fn closed_form(&self, x: f64) -> Result<Complex64> {
        if !(x > 0.0) {
            return Err(Error::Domain { function: "closed_form", detail: format!("x = {x} must be positive") });
        }
        let e = self.eps;
        let j = self.j as f64;
        Ok(match self.id {
            CaseId::J211 => {
                let osc = if e == 0.0 {
                    c(0.0, 0.0)
                } else {
                    let (ci, si) = specfun::ci_si(e * x);
                    e * c(-si, ci)
                };
                (1.0 - Complex64::from_polar(1.0, e * x)) / x + osc
            }
            CaseId::J11j => gamma0(c(j - 2.0, 0.0) * x)? - gamma0(c(j - 2.0, -(j - 2.0) * e) * x)?,
            CaseId::J12j => {
                -gamma0(c(j - 1.0, 0.0) * x)? - gamma0(c(j - 1.0, -(j - 1.0) * e) * x)?
                    + gamma0(c(j - 1.0, -e) * x)?
                    + gamma0(c(j - 1.0, -(j - 2.0) * e) * x)?
            }
            CaseId::J13j => gamma0(c(j, 0.0) * x)? - gamma0(c(j, -(j - 2.0) * e) * x)?,
            CaseId::J121 => {
                -gamma0(c(x, 0.0))? + 2.0 * gamma0(c(1.0, -e) * x)? - gamma0(c(1.0, -2.0 * e) * x)?
            }
            CaseId::J21j => {
                let (a, b) = (c(j - 2.0, 0.0), c(j - 2.0, -(j - 2.0) * e));
                ((-a * x).exp() - (-b * x).exp()) / x + a * ei(-a * x)? - b * ei(-b * x)?
            }
            CaseId::J22j => {
                let a = c(j - 1.0, -e);
                let b = c(j - 1.0, -(j - 1.0) * e);
                let d = c(j - 1.0, -(j - 2.0) * e);
                let f = c(j - 1.0, 0.0);
                inverse_square_antiderivative(b, x)? - inverse_square_antiderivative(a, x)?
                    - inverse_square_antiderivative(d, x)?
                    + inverse_square_antiderivative(f, x)?
            }
            CaseId::J23j => {
                let (a, b) = (c(j, 0.0), c(j, -(j - 2.0) * e));
                ((-a * x).exp() - (-b * x).exp()) / x + a * ei(-a * x)? - b * ei(-b * x)?
            }
            CaseId::J131 => -ei(c(-2.0 * x, 0.0))? - gamma0(c(2.0, -e) * x)?,
            CaseId::J221 => {
                let a = c(1.0, -e);
                let b = c(1.0, -2.0 * e);
                -ei(c(-x, 0.0))? + 2.0 * a * gamma_m1(a * x)? - b * gamma_m1(b * x)? - (-x).exp() / x
            }
            CaseId::J231 => {
                let a = c(2.0, -e);
                2.0 * ei(c(-2.0 * x, 0.0))? + (-2.0 * x).exp() / x - a * gamma_m1(a * x)?
            }
        })
    }

    /// `closed_form(b) - closed_form(a)`.
    pub fn definite(&self, a: f64, b: f64) -> Result<Complex64> {
        Ok(self.closed_form(b)? - self.closed_form(a)?)
    }
}

/// Largest `|D closed_form - integrand|` over the grid, with `D` a
/// fourth-order central difference.
pub fn verify_antiderivative(case: &AntiderivativeCase, xs: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &x in xs {
        let h = 1e-3 * x.max(1.0);
        let f = |t: f64| case.closed_form(t);
        let d = (f(x - 2.0 * h)? - 8.0 * f(x - h)? + 8.0 * f(x + h)? - f(x + 2.0 * h)?) / (12.0 * h);
        worst = worst.max((d - case.integrand(x)).norm());
    }
    Ok(worst)
}

/// Least-squares fit `y ~ c1 a + c2 b` in relative error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelFit {
    pub c1: f64,
    pub c2: f64,
    /// Root-mean-square relative residual.
    pub relative_residual: f64,
}

pub fn fit_two_term(a: &[f64], b: &[f64], y: &[f64]) -> Result<ModelFit> {
    let (mut saa, mut sab, mut sbb, mut say, mut sby) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut n = 0usize;
    for i in 0..y.len() {
        if y[i] == 0.0 {
            continue;
        }
        let (ai, bi) = (a[i] / y[i], b[i] / y[i]);
        saa += ai * ai;
        sab += ai * bi;
        sbb += bi * bi;
        say += ai;
        sby += bi;
        n += 1;
    }
    let det = saa * sbb - sab * sab;
    if n < 2 || det.abs() <= 1e-14 * saa * sbb {
        return Err(Error::Degenerate("fit regressors are collinear or too few points".into()));
    }
    let c1 = (say * sbb - sby * sab) / det;
    let c2 = (sby * saa - say * sab) / det;
    let mut ss = 0.0;
    for i in 0..y.len() {
        if y[i] != 0.0 {
            let r = (c1 * a[i] + c2 * b[i] - y[i]) / y[i];
            ss += r * r;
        }
    }
    Ok(ModelFit { c1, c2, relative_residual: (ss / n as f64).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub n: f64,
    pub lambda: f64,
    pub eps: f64,
    pub abs_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundScanReport {
    pub case: String,
    pub label_note: Option<String>,
    pub k: u32,
    pub alpha: Complex64,
    pub d_star: u64,
    pub eps_order: u32,
    pub rows: Vec<ScanRow>,
    /// `C1 / log N + C2 eps^order`.
    pub fit_eps: ModelFit,
    /// `C1 / log N + C2 eps |log eps|`.
    pub fit_eps_log: ModelFit,
}

/// `|int_{log d*}^{log N}|` of the case's integrand over an `(N, lambda)`
/// grid, fitted by both envelope models. `N` is given as `log N` so the grid
/// may reach beyond 64-bit integers.
pub fn bound_scan(
    id: CaseId,
    j: u32,
    k: u32,
    alpha: Complex64,
    log_n_grid: &[f64],
    lambdas: &[f64],
) -> Result<BoundScanReport> {
    let d_star = ensemble::threshold_prime(k, alpha)?;
    let log_d = (d_star as f64).ln();
    let mut rows = Vec::new();
    for &log_n in log_n_grid {
        if log_n <= log_d {
            return Err(Error::Precondition(format!("log N = {log_n} must exceed log d* = {log_d}")));
        }
        for &lambda in lambdas {
            let eps = lambda / log_n;
            let case = AntiderivativeCase::new(id, j, eps)?;
            rows.push(ScanRow { n: log_n.exp(), lambda, eps, abs_j: case.definite(log_d, log_n)?.norm() });
        }
    }
    let inv_log: Vec<f64> = rows.iter().map(|r| 1.0 / r.n.ln()).collect();
    let eps_pow: Vec<f64> = rows.iter().map(|r| r.eps.powi(id.eps_order() as i32)).collect();
    let eps_log: Vec<f64> = rows.iter().map(|r| r.eps * r.eps.ln().abs()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.abs_j).collect();
    Ok(BoundScanReport {
        case: AntiderivativeCase::new(id, j, 0.0)?.label(),
        label_note: id.label_note().map(str::to_string),
        k,
        alpha,
        d_star,
        eps_order: id.eps_order(),
        fit_eps: fit_two_term(&inv_log, &eps_pow, &y)?,
        fit_eps_log: fit_two_term(&inv_log, &eps_log, &y)?,
        rows,
    })
}

/// `N,lambda,term,abs_J,fit_eps,fit_eps_log` rows.
pub fn write_scan_csv<W: Write>(mut out: W, report: &BoundScanReport) -> Result<()> {
    let io = |e: std::io::Error| Error::Precondition(format!("write failed: {e}"));
    writeln!(out, "N,lambda,term,abs_J,fit_eps,fit_eps_log").map_err(io)?;
    let order = report.eps_order as i32;
    for r in &report.rows {
        let inv = 1.0 / r.n.ln();
        let a = report.fit_eps.c1 * inv + report.fit_eps.c2 * r.eps.powi(order);
        let b = report.fit_eps_log.c1 * inv + report.fit_eps_log.c2 * r.eps * r.eps.ln().abs();
        writeln!(out, "{:.16e},{:.16e},{},{:.16e},{a:.16e},{b:.16e}", r.n, r.lambda, report.case, r.abs_j).map_err(io)?;
    }
    Ok(())
}

/// `pi(u) log z(u)` at the two ends of the Abel summation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryTerms {
    pub d_star: u64,
    /// `pi(N) L(N, lambda, N)`.
    pub upper: Complex64,
    /// `pi(d*) L(d*, lambda, N)`.
    pub lower: Complex64,
}

/// `L(u, lambda, N) = log z(u)`, principal branch, with `z` the factor of
/// the characteristic function at a real point `u > d*`.
pub fn log_factor(cfg: &EnsembleConfig, u: f64, lambda: f64) -> Result<Complex64> {
    let phase = lambda * u.ln() / (cfg.n as f64).ln();
    Ok(ensemble::ln_1p(ensemble::charfn_factor_offset(cfg.k, cfg.alpha, u, phase)?))
}

pub fn boundary_terms(cfg: &EnsembleConfig, lambda: f64) -> Result<BoundaryTerms> {
    let d_star = ensemble::threshold_prime(cfg.k, cfg.alpha)?;
    if cfg.n < d_star {
        return Err(Error::Precondition(format!("N = {} must be at least d* = {d_star}", cfg.n)));
    }
    let table = cfg.prime_table()?;
    let pi_n = table.count_up_to(cfg.n) as f64;
    let pi_d = primes::prime_count(d_star) as f64;
    Ok(BoundaryTerms {
        d_star,
        upper: pi_n * log_factor(cfg, cfg.n as f64, lambda)?,
        lower: pi_d * log_factor(cfg, d_star as f64, lambda)?,
    })
}

/// Every case at `(j, eps)` checked on `xs`, in parallel.
pub fn verify_all(j: u32, eps: f64, xs: &[f64]) -> Result<Vec<(String, f64)>> {
    CaseId::ALL
        .par_iter()
        .map(|&id| {
            let case = AntiderivativeCase::new(id, j, eps)?;
            Ok((case.label(), verify_antiderivative(&case, xs)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_names_round_trip() {
        for id in CaseId::ALL {
            assert_eq!(id.name().parse::<CaseId>().unwrap(), id);
        }
        assert_eq!("J~_{2,1,1}".parse::<CaseId>().unwrap(), CaseId::J211);
        assert!(matches!("J9,9,9".parse::<CaseId>(), Err(Error::UnknownCase(_))));
    }

    #[test]
    fn fit_recovers_exact_model() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.0, 0.5, 0.25, 0.125];
        let y: Vec<f64> = a.iter().zip(&b).map(|(x, z)| 2.0 * x + 3.0 * z).collect();
        let fit = fit_two_term(&a, &b, &y).unwrap();
        assert!((fit.c1 - 2.0).abs() < 1e-12 && (fit.c2 - 3.0).abs() < 1e-12);
        assert!(fit.relative_residual < 1e-12);
    }
}
