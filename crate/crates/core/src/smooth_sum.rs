//! The smooth sum `S_f(k, alpha; N) = sum f(log n / log N) alpha^Omega(n) / n`
//! over the ensemble, by direct summation, through the exact spectral
//! identity `S = Z * int phi_N(lambda) f^(lambda) dlambda`, and through the
//! large-N asymptotic built on the limiting characteristic function.
//!
//! Fourier convention: `f^(lambda) = (1/2pi) int f(u) e^(-i lambda u) du`,
//! so that `int phi(lambda) f^(lambda) dlambda = E[f(xi)]` for a
//! characteristic function `phi`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dickman::CharFnLimit;
use crate::ensemble::{self, CharFn, EnsembleConfig};
use crate::{primes, quadrature, specfun, Error, Result};

type RealToComplex = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;
type TailBound = Arc<dyn Fn(f64) -> Option<f64> + Send + Sync>;

/// A test function with its Fourier transform and decay data.
#[derive(Clone)]
pub struct CutoffDescriptor {
    pub name: String,
    eval: RealToComplex,
    transform: Option<RealToComplex>,
    /// Decay exponent: `|f^(lambda)| <= C / (1 + |lambda|^eta)`.
    pub eta: f64,
    pub decay_constant: f64,
    /// Closed support interval, or `None` when unbounded.
    pub support: Option<(f64, f64)>,
    tail: TailBound,
}

impl fmt::Debug for CutoffDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CutoffDescriptor")
            .field("name", &self.name)
            .field("eta", &self.eta)
            .field("decay_constant", &self.decay_constant)
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

impl CutoffDescriptor {
    pub fn eval(&self, u: f64) -> Complex64 {
        (self.eval)(u)
    }

    /// `f^(lambda)`, if the transform is available.
    pub fn transform(&self, lambda: f64) -> Option<Complex64> {
        self.transform.as_ref().map(|t| t(lambda))
    }

    pub fn has_transform(&self) -> bool {
        self.transform.is_some()
    }

    /// Upper bound on `int_{|lambda| > r} |f^(lambda)| dlambda`; `None` when
    /// the tail is not integrable or no bound is known at this `r`.
    pub fn tail_bound(&self, r: f64) -> Option<f64> {
        (self.tail)(r)
    }

    /// `a f + b g` with the transforms combined linearly.
    pub fn linear_combination(a: Complex64, f: &CutoffDescriptor, b: Complex64, g: &CutoffDescriptor) -> Self {
        let (fe, ge) = (f.eval.clone(), g.eval.clone());
        let transform = match (&f.transform, &g.transform) {
            (Some(ft), Some(gt)) => {
                let (ft, gt) = (ft.clone(), gt.clone());
                Some(Arc::new(move |l| a * ft(l) + b * gt(l)) as RealToComplex)
            }
            _ => None,
        };
        let support = match (f.support, g.support) {
            (Some(x), Some(y)) => Some((x.0.min(y.0), x.1.max(y.1))),
            _ => None,
        };
        let (ftail, gtail) = (f.tail.clone(), g.tail.clone());
        let (an, bn) = (a.norm(), b.norm());
        CutoffDescriptor {
            name: format!("({a})*{} + ({b})*{}", f.name, g.name),
            eval: Arc::new(move |u| a * fe(u) + b * ge(u)),
            transform,
            eta: f.eta.min(g.eta),
            decay_constant: an * f.decay_constant + bn * g.decay_constant,
            support,
            tail: Arc::new(move |r| Some(an * ftail(r)? + bn * gtail(r)?)),
        }
    }
}

/// `1_[0,1]` with the closed-interval convention.
pub fn indicator() -> CutoffDescriptor {
    CutoffDescriptor {
        name: "indicator".into(),
        eval: Arc::new(|u| Complex64::new(if (0.0..=1.0).contains(&u) { 1.0 } else { 0.0 }, 0.0)),
        transform: Some(Arc::new(indicator_transform)),
        eta: 1.0,
        // |f^| <= min(1/2pi, 1/(pi |lambda|)) <= (2/pi) / (1 + |lambda|)
        decay_constant: 2.0 / PI,
        support: Some((0.0, 1.0)),
        tail: Arc::new(|_| None),
    }
}

/// `(1 - e^(-i lambda)) / (2 pi i lambda)`.
fn indicator_transform(lambda: f64) -> Complex64 {
    if lambda == 0.0 {
        return Complex64::new(1.0 / TAU, 0.0);
    }
    if lambda.abs() < 1e-4 {
        // series avoids cancellation: (1/2pi)(1 - i l/2 - l^2/6 + i l^3/24)
        let l = lambda;
        return Complex64::new(1.0 - l * l / 6.0, -l / 2.0 + l * l * l / 24.0) / TAU;
    }
    let one_minus = -ensemble::expm1_i(-lambda);
    one_minus / Complex64::new(0.0, TAU * lambda)
}

/// `e^(-1/(1-u^2))` on `(-1, 1)`, zero elsewhere.
pub fn bump_value(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    (-1.0 / ((1.0 - u) * (1.0 + u))).exp()
}

/// `|f^(lambda)| <= (3/2pi) e^-sqrt(lambda) lambda^(-3/4)` for the bump, `lambda >= 1`.
pub fn bump_decay_envelope(lambda: f64) -> f64 {
    let l = lambda.abs();
    3.0 / TAU * (-l.sqrt()).exp() * l.powf(-0.75)
}

/// `int_{|lambda|>r}` of the envelope: `(6/pi) sqrt(pi) erfc(r^(1/4))`.
pub fn bump_envelope_tail(r: f64) -> Option<f64> {
    if r < 1.0 {
        return None;
    }
    Some(2.0 * 3.0 / TAU * 2.0 * PI.sqrt() * specfun::erfc(r.powf(0.25)).re())
}

/// Transform of the bump, `(1/pi) int_0^1 f(u) cos(lambda u) du`.
pub fn bump_transform(lambda: f64, tol: f64) -> Result<f64> {
    let opts = quadrature::Options::with_tol(tol, tol).oscillatory(0.0, 1.0, lambda);
    let (v, _) = quadrature::integrate_real(|u| bump_value(u) * (lambda * u).cos(), 0.0, 1.0, &opts)?;
    Ok(v / PI)
}

/// Conservative decay exponent stored for the bump; the explicit
/// `e^-sqrt(lambda)` envelope is used wherever it is sharper.
const BUMP_ETA: f64 = 10.0;

/// The bump `e^(-1/(1-u^2))` on `[-1, 1]`.
pub fn bump() -> CutoffDescriptor {
    let f0 = bump_transform(0.0, 1e-14).unwrap_or(0.0);
    CutoffDescriptor {
        name: "bump".into(),
        eval: Arc::new(|u| Complex64::new(bump_value(u), 0.0)),
        transform: Some(Arc::new(|l| Complex64::new(bump_transform(l, 1e-12).unwrap_or(f64::NAN), 0.0))),
        eta: BUMP_ETA,
        decay_constant: envelope_decay_constant(f0, BUMP_ETA, 1.0),
        support: Some((-1.0, 1.0)),
        tail: Arc::new(bump_envelope_tail),
    }
}

/// The bump moved onto `[0, 1]`: `u -> bump(2u - 1)`, with transform
/// `(1/2) e^(-i lambda/2) b^(lambda/2)`.
pub fn bump_unit() -> CutoffDescriptor {
    let f0 = bump_transform(0.0, 1e-14).unwrap_or(0.0) / 2.0;
    CutoffDescriptor {
        name: "bump01".into(),
        eval: Arc::new(|u| Complex64::new(bump_value(2.0 * u - 1.0), 0.0)),
        transform: Some(Arc::new(|l| {
            Complex64::from_polar(0.5, -0.5 * l) * bump_transform(0.5 * l, 1e-12).unwrap_or(f64::NAN)
        })),
        eta: BUMP_ETA,
        decay_constant: envelope_decay_constant(f0, BUMP_ETA, 2.0),
        support: Some((0.0, 1.0)),
        tail: Arc::new(|r| bump_envelope_tail(r / 2.0)),
    }
}

/// `sup (1 + lambda^eta) min(f^(0), envelope)` over a fine grid, with the
/// envelope argument stretched by `scale`.
fn envelope_decay_constant(f0: f64, eta: f64, scale: f64) -> f64 {
    let mut best = 0.0f64;
    let mut l: f64 = 0.0;
    while l < 1e5 {
        let base = if l / scale >= 1.0 { (bump_decay_envelope(l / scale) / scale).min(f0) } else { f0 };
        best = best.max((1.0 + l.powf(eta)) * base);
        l += if l < 10.0 { 0.01 } else { l * 1e-3 };
    }
    best
}

/// Gaussian `e^(-8 (u - 1/2)^2)`, the Schwartz-class control case.
pub fn gaussian() -> CutoffDescriptor {
    let amplitude = (PI / 8.0).sqrt() / TAU;
    let eta = 10.0;
    // sup (1 + l^eta) e^(-l^2/32) is attained near l^2 = 16 eta
    let mut c = 0.0f64;
    let mut l = 0.0;
    while l < 200.0 {
        c = c.max((1.0 + f64::powf(l, eta)) * amplitude * (-l * l / 32.0).exp());
        l += 0.01;
    }
    CutoffDescriptor {
        name: "gaussian".into(),
        eval: Arc::new(|u| Complex64::new((-8.0 * (u - 0.5) * (u - 0.5)).exp(), 0.0)),
        transform: Some(Arc::new(move |l| Complex64::from_polar(amplitude * (-l * l / 32.0).exp(), -0.5 * l))),
        eta,
        decay_constant: c,
        support: None,
        tail: Arc::new(|r| Some(specfun::erfc(r / 32f64.sqrt()).re())),
    }
}

/// `f = c`; only the direct route applies.
pub fn constant(c: Complex64) -> CutoffDescriptor {
    CutoffDescriptor {
        name: format!("constant({c})"),
        eval: Arc::new(move |_| c),
        transform: None,
        eta: 0.0,
        decay_constant: f64::INFINITY,
        support: None,
        tail: Arc::new(|_| None),
    }
}

/// Indicator, bump, bump on `[0, 1]`, and Gaussian.
pub fn builtin_cutoffs() -> Vec<CutoffDescriptor> {
    vec![indicator(), bump(), bump_unit(), gaussian()]
}

pub fn cutoff_by_name(name: &str) -> Result<CutoffDescriptor> {
    builtin_cutoffs()
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| Error::Precondition(format!("unknown cutoff {name:?}; expected indicator, bump, bump01 or gaussian")))
}

/// `(1/2pi) int f(u) e^(-i lambda u) du` by adaptive quadrature over the
/// support.
pub fn fourier_transform(f: &CutoffDescriptor, lambda: f64, tol: f64) -> Result<Complex64> {
    let (a, b) = f.support.ok_or_else(|| {
        Error::Precondition(format!("cutoff {} has unbounded support; use its analytic transform", f.name))
    })?;
    let opts = quadrature::Options::with_tol(tol, tol).oscillatory(a, b, lambda);
    let r = quadrature::integrate(|u| f.eval(u) * Complex64::from_polar(1.0, -lambda * u), a, b, &opts)?;
    Ok(r.value / TAU)
}

/// Neumaier-compensated complex sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: Complex64,
    carry: Complex64,
}

impl CompensatedSum {
    fn add(&mut self, x: Complex64) {
        fn step(sum: &mut f64, carry: &mut f64, x: f64) {
            let t = *sum + x;
            if sum.abs() >= x.abs() {
                *carry += (*sum - t) + x;
            } else {
                *carry += (x - t) + *sum;
            }
            *sum = t;
        }
        step(&mut self.sum.re, &mut self.carry.re, x.re);
        step(&mut self.sum.im, &mut self.carry.im, x.im);
    }

    fn merge(&mut self, other: CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    fn value(&self) -> Complex64 {
        self.sum + self.carry
    }
}

/// Exact sum over the enumerated ensemble.
pub fn smooth_sum_direct(cfg: &EnsembleConfig, f: &CutoffDescriptor, cap: u64) -> Result<Complex64> {
    let log_n = (cfg.n as f64).ln();
    let powers = alpha_powers(cfg.alpha, 64 * cfg.k as usize);
    let mut acc = CompensatedSum::default();
    ensemble::visit_ensemble(cfg, cap, |x, omega, _| {
        let fx = f.eval(x.ln() / log_n);
        if fx.re != 0.0 || fx.im != 0.0 {
            let power = powers.get(omega as usize).copied().unwrap_or_else(|| cfg.alpha.powu(omega));
            acc.add(fx * power / x);
        }
    })?;
    Ok(acc.value())
}

fn alpha_powers(alpha: Complex64, n: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut p = Complex64::new(1.0, 0.0);
    for _ in 0..=n {
        out.push(p);
        p *= alpha;
    }
    out
}

/// Largest `N` accepted by [`smooth_sum_sieved`].
pub const SIEVE_LIMIT: u64 = 4_000_000_000;

const SIEVE_SEGMENT: usize = 1 << 18;

/// Direct sum for cutoffs supported in `(-inf, 1]`: then only `n <= N`
/// contribute, every such `n` is automatically `N`-smooth, and the sum runs
/// over the k-free integers up to `N` found by a segmented sieve that
/// records `Omega(n)`. This reaches `N` far beyond enumeration.
pub fn smooth_sum_sieved(cfg: &EnsembleConfig, f: &CutoffDescriptor) -> Result<Complex64> {
    let (_, upper) = f.support.ok_or_else(|| {
        Error::Precondition(format!("cutoff {} has unbounded support; the sieve needs support in (-inf, 1]", f.name))
    })?;
    if upper > 1.0 {
        return Err(Error::Precondition(format!(
            "cutoff {} is supported up to {upper}; the sieve needs support in (-inf, 1]",
            f.name
        )));
    }
    if cfg.n > SIEVE_LIMIT {
        return Err(Error::SizeCap { size: cfg.n as f64, cap: SIEVE_LIMIT });
    }
    let limit = cfg.n;
    let root = (limit as f64).sqrt() as u64 + 1;
    let small = primes::sieve_primes(root.max(2))?;
    let small: Vec<u64> = small.primes().iter().copied().filter(|&p| p * p <= limit).collect();
    let log_n = (limit as f64).ln();
    let powers = alpha_powers(cfg.alpha, 64);
    let k = cfg.k;
    let segments = (limit as usize).div_ceil(SIEVE_SEGMENT);
    let partials: Vec<CompensatedSum> = (0..segments)
        .into_par_iter()
        .map(|s| {
            let lo = 1 + (s * SIEVE_SEGMENT) as u64;
            let hi = (lo + SIEVE_SEGMENT as u64 - 1).min(limit);
            sieve_segment(lo, hi, &small, k, log_n, &powers, f)
        })
        .collect();
    let mut total = CompensatedSum::default();
    for part in partials {
        total.merge(part);
    }
    Ok(total.value())
}

fn sieve_segment(
    lo: u64,
    hi: u64,
    small: &[u64],
    k: u32,
    log_n: f64,
    powers: &[Complex64],
    f: &CutoffDescriptor,
) -> CompensatedSum {
    let len = (hi - lo + 1) as usize;
    let mut omega = vec![0u8; len];
    let mut logs = vec![0.0f64; len];
    let mut free = vec![true; len];
    for &p in small {
        let lp = (p as f64).ln();
        let mut pe = p;
        let mut e = 1;
        while pe <= hi {
            let mut m = lo.div_ceil(pe) * pe;
            while m <= hi {
                let i = (m - lo) as usize;
                if e >= k {
                    free[i] = false;
                } else {
                    omega[i] += 1;
                    logs[i] += lp;
                }
                m += pe;
            }
            if e >= k {
                break;
            }
            match pe.checked_mul(p) {
                Some(next) => pe = next,
                None => break,
            }
            e += 1;
        }
    }
    let mut acc = CompensatedSum::default();
    for i in 0..len {
        if !free[i] {
            continue;
        }
        let n = (lo + i as u64) as f64;
        let ln = n.ln();
        let fx = f.eval(ln / log_n);
        if fx.re == 0.0 && fx.im == 0.0 {
            continue;
        }
        // a leftover factor is a single prime above sqrt(N)
        let big = u8::from(ln - logs[i] > 0.5);
        let o = (omega[i] + big) as usize;
        acc.add(fx * powers[o] / n);
    }
    acc
}

/// Result of the spectral route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralValue {
    pub value: Complex64,
    pub r: f64,
    /// Bound on the part of the integral beyond `|lambda| = r`, times `|Z|`.
    pub tail_bound: f64,
    /// Quadrature error estimate, times `|Z|`.
    pub quadrature_error: f64,
}

/// `Z * int_{-r}^{r} phi_N(lambda) f^(lambda) dlambda`.
pub fn smooth_sum_spectral(cfg: &EnsembleConfig, f: &CutoffDescriptor, r: f64, tol: f64) -> Result<SpectralValue> {
    if !(f.eta > 1.0) {
        return Err(Error::Precondition(format!(
            "cutoff {} has eta = {}; the spectral route needs eta > 1",
            f.name, f.eta
        )));
    }
    let transform = f
        .transform
        .clone()
        .ok_or_else(|| Error::Precondition(format!("cutoff {} has no Fourier transform", f.name)))?;
    let z = ensemble::partition_function(cfg)?;
    let trivial = ensemble::trivial_charfn_bound(cfg)?;
    let tail = f.tail_bound(r).ok_or(Error::RTooSmall { tail_bound: f64::INFINITY, tol })? * trivial * z.norm();
    if tail > tol {
        return Err(Error::RTooSmall { tail_bound: tail, tol });
    }
    let charfn = CharFn::new(cfg)?;
    // oscillation of the integrand comes from the spread of xi and of the support
    let table = cfg.prime_table()?;
    let ps = table.up_to(cfg.n);
    let log_n = (cfg.n as f64).ln();
    let xi_max = ((cfg.k - 1) as f64 * ps.iter().map(|&p| (p as f64).ln()).sum::<f64>() / log_n).min(12.0);
    let (lo, hi) = f.support.unwrap_or((-2.0, 2.0));
    let spread = xi_max + hi.abs().max(lo.abs()) + 1.0;
    let mut opts = quadrature::Options::with_tol((tol / 3.0) / z.norm().max(1e-300), 1e-14);
    opts.max_panels = 200_000;
    opts = opts.oscillatory(-r, r, spread);
    opts.initial_panels = opts.initial_panels.max(16);
    let failure = std::sync::Mutex::new(None);
    let integral = quadrature::integrate(
        |lambda| match charfn.eval(lambda) {
            Ok(phi) => phi * transform(lambda),
            Err(e) => {
                *failure.lock().unwrap_or_else(|p| p.into_inner()) = Some(e);
                Complex64::new(0.0, 0.0)
            }
        },
        -r,
        r,
        &opts,
    )?;
    if let Some(e) = failure.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e);
    }
    Ok(SpectralValue {
        value: z * integral.value,
        r,
        tail_bound: tail,
        quadrature_error: integral.abs_error * z.norm(),
    })
}

/// `int_{-r}^{r} phi^(alpha)(lambda) f^(lambda) dlambda`.
pub fn limit_integral(alpha: Complex64, f: &CutoffDescriptor, r: f64, tol: f64) -> Result<Complex64> {
    let transform = f
        .transform
        .clone()
        .ok_or_else(|| Error::Precondition(format!("cutoff {} has no Fourier transform", f.name)))?;
    let phi = CharFnLimit::new(alpha);
    let (lo, hi) = f.support.unwrap_or((-2.0, 2.0));
    let mut opts = quadrature::Options::with_tol(tol, 1e-13).oscillatory(-r, r, hi.abs().max(lo.abs()) + 2.0);
    opts.initial_panels = opts.initial_panels.max(8);
    Ok(quadrature::integrate(|l| phi.eval(l) * transform(l), -r, r, &opts)?.value)
}

/// How `R` grows with `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RRule {
    Fixed { r: f64 },
    /// `log N / log log N`.
    LogOverLogLog,
    /// `(log N)^(1 - tau)`.
    LogPower { tau: f64 },
}

impl RRule {
    pub fn r(&self, n: u64) -> f64 {
        let l = (n as f64).ln();
        match *self {
            RRule::Fixed { r } => r,
            RRule::LogOverLogLog => l / l.ln(),
            RRule::LogPower { tau } => l.powf(1.0 - tau),
        }
    }
}

/// Settings for [`asymptotic_prediction`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionOptions {
    pub tol: f64,
    pub cap: u64,
    /// Run the spectral route when `N` is at most this.
    pub spectral_limit: u64,
    /// Cutoff radius for the spectral route, chosen so its tail is small.
    pub spectral_r: f64,
    /// Grid used to estimate the constant `C`.
    pub constant_grid: [u64; 4],
}

impl Default for PredictionOptions {
    fn default() -> Self {
        PredictionOptions {
            tol: 1e-9,
            cap: ensemble::DEFAULT_ENUMERATION_CAP,
            spectral_limit: 100_000,
            spectral_r: 1000.0,
            constant_grid: [10_000, 100_000, 1_000_000, 10_000_000],
        }
    }
}

/// Every route for one configuration side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub cfg: EnsembleConfig,
    pub cutoff: String,
    pub r: f64,
    pub direct: Option<Complex64>,
    /// How `direct` was obtained: "enumeration" or "sieve".
    pub direct_method: Option<String>,
    pub spectral: Option<SpectralValue>,
    pub partition_function: Complex64,
    /// `int_{|lambda| <= R} phi^(alpha) f^`.
    pub limit_integral: Complex64,
    /// Estimate of the constant `C` (convergent Euler product).
    pub constant: Complex64,
    /// `C (log N)^alpha * limit_integral`.
    pub asymptotic: Complex64,
    /// `log log N / log N + (log N)^(|alpha| - Re alpha) / R^(eta - 1)`.
    pub epsilon_bound: f64,
    pub epsilon_terms: [f64; 2],
    /// Exact value over `Z_N * limit_integral`.
    pub ratio_to_limit: Option<Complex64>,
    /// Exact value over `asymptotic`.
    pub ratio_to_asymptotic: Option<Complex64>,
    /// `|direct - spectral|` when both were computed.
    pub route_gap: Option<f64>,
}

impl ComparisonReport {
    /// The most trustworthy exact value available.
    pub fn exact(&self) -> Option<Complex64> {
        self.direct.or(self.spectral.map(|s| s.value))
    }
}

/// Checks the hypotheses on `alpha`, `f` and `R`.
pub fn check_hypotheses(cfg: &EnsembleConfig, f: &CutoffDescriptor, r: f64) -> Result<()> {
    let alpha = cfg.alpha;
    let delta = alpha.norm() - alpha.re;
    if alpha.norm() >= 2.0 {
        return Err(Error::Precondition(format!("|alpha| = {} < 2 fails", alpha.norm())));
    }
    if ensemble::is_forbidden(cfg.k, alpha) {
        return Err(Error::Precondition(format!("alpha = {alpha} is a forbidden value")));
    }
    if !(f.eta > delta + 1.0) {
        return Err(Error::Precondition(format!(
            "eta = {} > |alpha| - Re alpha + 1 = {} fails",
            f.eta,
            delta + 1.0
        )));
    }
    let log_n = (cfg.n as f64).ln();
    if !(r / log_n < 1.0) {
        return Err(Error::Precondition(format!("R / log N = {} < 1 fails", r / log_n)));
    }
    let decay = log_n.powf(delta) / r.powf(f.eta - 1.0);
    if !(decay < 1.0) {
        return Err(Error::Precondition(format!(
            "(log N)^(|alpha| - Re alpha) / R^(eta - 1) = {decay} < 1 fails"
        )));
    }
    Ok(())
}

/// Large-N prediction compared with whichever exact routes are feasible.
pub fn asymptotic_prediction(
    cfg: &EnsembleConfig,
    f: &CutoffDescriptor,
    r: f64,
    opts: &PredictionOptions,
) -> Result<ComparisonReport> {
    check_hypotheses(cfg, f, r)?;
    let alpha = cfg.alpha;
    let log_n = (cfg.n as f64).ln();
    let delta = alpha.norm() - alpha.re;

    let mut grid: Vec<u64> = opts.constant_grid.to_vec();
    grid.push(cfg.n.max(3));
    let constant = ensemble::partition_constant(cfg.k, alpha, &grid)?.convergent_product;
    let limit = limit_integral(alpha, f, r, opts.tol * 1e-2)?;
    let asymptotic = constant * ensemble::log_power(cfg.n, alpha)? * limit;
    let z = ensemble::partition_function(cfg)?;

    let (direct, direct_method) = match smooth_sum_direct(cfg, f, opts.cap) {
        Ok(v) => (Some(v), Some("enumeration".to_string())),
        Err(Error::SizeCap { .. }) => match smooth_sum_sieved(cfg, f) {
            Ok(v) => (Some(v), Some("sieve".to_string())),
            Err(Error::Precondition(_)) | Err(Error::SizeCap { .. }) => (None, None),
            Err(e) => return Err(e),
        },
        Err(e) => return Err(e),
    };
    let spectral = if cfg.n <= opts.spectral_limit {
        Some(smooth_sum_spectral(cfg, f, opts.spectral_r, opts.tol)?)
    } else {
        None
    };
    let route_gap = match (direct, spectral) {
        (Some(d), Some(s)) => Some((d - s.value).norm()),
        _ => None,
    };
    let terms = [log_n.ln() / log_n, log_n.powf(delta) / r.powf(f.eta - 1.0)];
    let mut report = ComparisonReport {
        cfg: *cfg,
        cutoff: f.name.clone(),
        r,
        direct,
        direct_method,
        spectral,
        partition_function: z,
        limit_integral: limit,
        constant,
        asymptotic,
        epsilon_bound: terms[0] + terms[1],
        epsilon_terms: terms,
        ratio_to_limit: None,
        ratio_to_asymptotic: None,
        route_gap,
    };
    if let Some(exact) = report.exact() {
        report.ratio_to_limit = Some(exact / (z * limit));
        report.ratio_to_asymptotic = Some(exact / asymptotic);
    }
    Ok(report)
}

/// Regime of the error term when `R = (log N)^(1 - tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionCase {
    /// `log log N / log N` dominates.
    A,
    /// `(log N)^(-eta (1 - tau) - tau + delta + 1)` dominates.
    B,
    /// Outside the range where the asymptotic applies.
    Invalid,
}

impl fmt::Display for RegionCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegionCase::A => "a",
            RegionCase::B => "b",
            RegionCase::Invalid => "invalid",
        })
    }
}

/// Classifies `(tau, eta)` for `delta = |alpha| - Re alpha`.
pub fn error_region(tau: f64, eta: f64, delta: f64) -> Result<RegionCase> {
    if !(eta > 1.0) {
        return Err(Error::Precondition(format!("eta = {eta} must exceed 1")));
    }
    let lower = (eta - (delta + 2.0)) / (eta - 1.0);
    let upper = (eta - (delta + 1.0)) / (eta - 1.0);
    Ok(if !(tau > 0.0 && tau < 1.0) || tau >= upper {
        RegionCase::Invalid
    } else if tau <= lower {
        RegionCase::A
    } else {
        RegionCase::B
    })
}

/// Writes `tau,eta,case` rows over a grid.
pub fn write_region_csv<W: Write>(mut out: W, delta: f64, taus: &[f64], etas: &[f64]) -> Result<()> {
    let io = |e: std::io::Error| Error::Precondition(format!("write failed: {e}"));
    writeln!(out, "tau,eta,case").map_err(io)?;
    for &eta in etas {
        for &tau in taus {
            let case = error_region(tau, eta, delta)?;
            writeln!(out, "{tau:.16e},{eta:.16e},{case}").map_err(io)?;
        }
    }
    Ok(())
}

/// Error rate when `R = log N / log log N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Rate {
    /// `log log N / log N`.
    LogLogOverLog,
    /// `(log log N)^loglog_exponent / (log N)^log_exponent`.
    Power { loglog_exponent: f64, log_exponent: f64 },
}

impl Rate {
    pub fn eval(&self, n: f64) -> f64 {
        let l = n.ln();
        match *self {
            Rate::LogLogOverLog => l.ln() / l,
            Rate::Power { loglog_exponent, log_exponent } => l.ln().powf(loglog_exponent) / l.powf(log_exponent),
        }
    }
}

pub fn corollary1_rate(eta: f64, delta: f64) -> Result<Rate> {
    if !(eta > delta) {
        return Err(Error::Precondition(format!("eta = {eta} must exceed |alpha| - Re alpha = {delta}")));
    }
    Ok(if eta > delta + 2.0 {
        Rate::LogLogOverLog
    } else {
        Rate::Power { loglog_exponent: eta - 1.0, log_exponent: eta - (delta + 1.0) }
    })
}
