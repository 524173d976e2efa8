//! The ensemble of k-free integers with prime factors `<= N`, weighted by
//! the complex measure `alpha^Omega(x) / x`.
//!
//! Everything here is exact in the sense that no asymptotics are used: the
//! partition function and the characteristic function are finite Euler
//! products, and small ensembles can be enumerated outright.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_bigint::BigUint;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::{primes, primes::PrimeTable, Error, Result, EULER_GAMMA};

/// Default bound on `k^pi(N)` for enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 26;

/// Primes per work unit in parallel products. Fixed so results do not depend
/// on the thread count.
const CHUNK: usize = 1 << 14;

/// One ensemble: k-free integers built from primes `<= n`, weight `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub k: u32,
    pub alpha: Complex64,
    pub n: u64,
}

impl EnsembleConfig {
    pub fn new(k: u32, alpha: Complex64, n: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Precondition(format!("k = {k} must be at least 2")));
        }
        if alpha.norm() == 0.0 || !alpha.is_finite() {
            return Err(Error::Precondition(format!("alpha = {alpha} must be finite and nonzero")));
        }
        if n < 2 {
            return Err(Error::Precondition(format!("N = {n} must be at least 2")));
        }
        Ok(EnsembleConfig { k, alpha, n })
    }

    pub fn real(k: u32, alpha: f64, n: u64) -> Result<Self> {
        Self::new(k, Complex64::new(alpha, 0.0), n)
    }

    pub fn with_alpha(&self, alpha: Complex64) -> Result<Self> {
        Self::new(self.k, alpha, self.n)
    }

    pub fn with_n(&self, n: u64) -> Result<Self> {
        Self::new(self.k, self.alpha, n)
    }

    /// Primes `<= N` from the shared table.
    pub fn prime_table(&self) -> Result<Arc<PrimeTable>> {
        primes::shared(self.n)
    }
}

/// Exponents `nu(p)` of one ensemble element, indexed by the position of
/// `p` among the primes `<= N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Factorization {
    pub exponents: Vec<u8>,
}

impl Factorization {
    /// Factors `value` over the primes `<= N`; fails unless the result is in
    /// the ensemble.
    pub fn of(cfg: &EnsembleConfig, value: u64) -> Result<Self> {
        let table = cfg.prime_table()?;
        let ps = table.up_to(cfg.n);
        let mut rest = value;
        if rest == 0 {
            return Err(Error::Precondition("0 is not in any ensemble".into()));
        }
        let mut exponents = vec![0u8; ps.len()];
        for (i, &p) in ps.iter().enumerate() {
            while rest % p == 0 {
                rest /= p;
                exponents[i] += 1;
            }
            if u32::from(exponents[i]) >= cfg.k {
                return Err(Error::Precondition(format!("{value} is divisible by {p}^{}", cfg.k)));
            }
        }
        if rest != 1 {
            return Err(Error::Precondition(format!("{value} has a prime factor above N = {}", cfg.n)));
        }
        Ok(Factorization { exponents })
    }

    pub fn omega(&self) -> u32 {
        self.exponents.iter().map(|&e| u32::from(e)).sum()
    }

    pub fn value(&self, primes: &[u64]) -> BigUint {
        let mut v = BigUint::from(1u32);
        for (&e, &p) in self.exponents.iter().zip(primes) {
            for _ in 0..e {
                v *= p;
            }
        }
        v
    }
}

/// An enumerated element with its exact value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Element {
    #[serde(serialize_with = "serialize_big")]
    pub value: BigUint,
    pub factorization: Factorization,
}

fn serialize_big<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    match u64::try_from(v) {
        Ok(small) => s.serialize_u64(small),
        Err(_) => s.serialize_str(&v.to_string()),
    }
}

impl Element {
    pub fn omega(&self) -> u32 {
        self.factorization.omega()
    }

    /// `log x / log N`.
    pub fn xi(&self, n: u64) -> f64 {
        big_to_f64(&self.value).ln() / (n as f64).ln()
    }
}

fn big_to_f64(v: &BigUint) -> f64 {
    match u64::try_from(v) {
        Ok(small) => small as f64,
        Err(_) => {
            let bits = v.bits();
            let shift = bits.saturating_sub(64);
            let top = u64::try_from(v >> shift).unwrap_or(u64::MAX);
            top as f64 * 2f64.powi(shift as i32)
        }
    }
}

/// `k^pi(N)` as a float (it may be astronomically large).
pub fn ensemble_size(cfg: &EnsembleConfig) -> Result<f64> {
    let count = cfg.prime_table()?.count_up_to(cfg.n);
    Ok((cfg.k as f64).powi(count as i32))
}

fn check_cap(cfg: &EnsembleConfig, cap: u64) -> Result<usize> {
    let table = cfg.prime_table()?;
    let count = table.count_up_to(cfg.n);
    let size = (cfg.k as f64).powi(count as i32);
    if size > cap as f64 {
        return Err(Error::SizeCap { size, cap });
    }
    Ok(count)
}

/// All elements sorted by value.
pub fn enumerate_ensemble(cfg: &EnsembleConfig, cap: u64) -> Result<Vec<Element>> {
    check_cap(cfg, cap)?;
    let table = cfg.prime_table()?;
    let ps = table.up_to(cfg.n);
    let mut out = Vec::new();
    let mut exps = vec![0u8; ps.len()];
    enumerate_rec(ps, cfg.k, 0, BigUint::from(1u32), &mut exps, &mut out);
    out.sort_by(|a, b| a.value.cmp(&b.value));
    Ok(out)
}

fn enumerate_rec(ps: &[u64], k: u32, i: usize, value: BigUint, exps: &mut Vec<u8>, out: &mut Vec<Element>) {
    if i == ps.len() {
        out.push(Element { value, factorization: Factorization { exponents: exps.clone() } });
        return;
    }
    let mut v = value;
    for e in 0..k {
        exps[i] = e as u8;
        let next = if e + 1 < k { Some(&v * ps[i]) } else { None };
        enumerate_rec(ps, k, i + 1, v, exps, out);
        match next {
            Some(n) => v = n,
            None => break,
        }
    }
    exps[i] = 0;
}

/// Calls `visit(x, omega, exponents)` for every element without storing
/// the ensemble; `x` is the value as a float. Order is depth-first.
pub fn visit_ensemble<F>(cfg: &EnsembleConfig, cap: u64, mut visit: F) -> Result<()>
where
    F: FnMut(f64, u32, &[u8]),
{
    check_cap(cfg, cap)?;
    let table = cfg.prime_table()?;
    let ps: Vec<f64> = table.up_to(cfg.n).iter().map(|&p| p as f64).collect();
    let mut exps = vec![0u8; ps.len()];
    fn rec<F: FnMut(f64, u32, &[u8])>(ps: &[f64], k: u32, i: usize, x: f64, omega: u32, exps: &mut [u8], visit: &mut F) {
        if i == ps.len() {
            visit(x, omega, exps);
            return;
        }
        let mut v = x;
        for e in 0..k {
            exps[i] = e as u8;
            rec(ps, k, i + 1, v, omega + e, exps, visit);
            v *= ps[i];
        }
        exps[i] = 0;
    }
    rec(&ps, cfg.k, 0, 1.0, 0, &mut exps, &mut visit);
    Ok(())
}

/// `sum_{x in subset} alpha^Omega(x) / x`.
pub fn measure(cfg: &EnsembleConfig, subset: &[Factorization]) -> Result<Complex64> {
    let table = cfg.prime_table()?;
    let ps = table.up_to(cfg.n);
    let mut total = Complex64::new(0.0, 0.0);
    for f in subset {
        if f.exponents.len() != ps.len() || f.exponents.iter().any(|&e| u32::from(e) >= cfg.k) {
            return Err(Error::Precondition("factorization does not belong to this ensemble".into()));
        }
        let x = big_to_f64(&f.value(ps));
        total += cfg.alpha.powu(f.omega()) / x;
    }
    Ok(total)
}

/// `e^(i x) - 1` without cancellation for small `x`.
#[inline]
pub(crate) fn expm1_i(x: f64) -> Complex64 {
    let (s, c) = (0.5 * x).sin_cos();
    // 2i sin(x/2) e^(ix/2)
    Complex64::new(-2.0 * s * s, 2.0 * s * c)
}

/// `ln(1 + w)` on the principal branch, accurate for small `|w|`.
#[inline]
pub(crate) fn ln_1p(w: Complex64) -> Complex64 {
    let r = w.norm_sqr();
    if r < 1e-6 {
        // |w| < 1e-3: six terms leave a remainder below 1e-21 |w|
        let w2 = w * w;
        let w3 = w2 * w;
        w - w2 * 0.5 + w3 * (1.0 / 3.0) - w2 * w2 * 0.25 + w2 * w3 * 0.2 - w3 * w3 * (1.0 / 6.0)
    } else {
        (w + 1.0).ln()
    }
}

/// Finite Euler product held as `head * exp(log_tail)`: factors at primes
/// `<= d*` (or any factor outside `|z - 1| < 1/2`) are multiplied directly,
/// the rest summed as principal logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogProduct {
    pub head: Complex64,
    pub log_tail: Complex64,
}

impl LogProduct {
    fn one() -> Self {
        LogProduct { head: Complex64::new(1.0, 0.0), log_tail: Complex64::new(0.0, 0.0) }
    }

    fn push(&mut self, p: u64, d_star: u64, w: Complex64) {
        if p <= d_star || w.norm_sqr() >= 0.25 {
            self.head *= w + 1.0;
        } else {
            self.log_tail += ln_1p(w);
        }
    }

    fn combine(mut self, other: LogProduct) -> Self {
        self.head *= other.head;
        self.log_tail += other.log_tail;
        self
    }

    pub fn value(&self) -> Complex64 {
        if self.head.norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.head * self.log_tail.exp()
    }
}

/// Product over primes `<= N` of `1 + w(p)`, chunked for parallel evaluation
/// and combined in a fixed order.
fn euler_product<W>(ps: &[u64], d_star: u64, w: W) -> Result<LogProduct>
where
    W: Fn(u64) -> Result<Complex64> + Sync,
{
    let partials: Vec<Result<LogProduct>> = ps
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = LogProduct::one();
            for &p in chunk {
                acc.push(p, d_star, w(p)?);
            }
            Ok(acc)
        })
        .collect();
    let mut total = LogProduct::one();
    for part in partials {
        total = total.combine(part?);
    }
    Ok(total)
}

/// `Z = prod_{p <= N} (1 + alpha/p + ... + (alpha/p)^(k-1))`.
pub fn partition_function(cfg: &EnsembleConfig) -> Result<Complex64> {
    Ok(partition_product(cfg)?.value())
}

pub fn partition_product(cfg: &EnsembleConfig) -> Result<LogProduct> {
    let table = cfg.prime_table()?;
    let ps = table.up_to(cfg.n);
    let d_star = threshold_prime(cfg.k, cfg.alpha)?;
    let (k, alpha) = (cfg.k, cfg.alpha);
    euler_product(ps, d_star, |p| {
        let q = alpha / p as f64;
        let mut term = q;
        let mut w = q;
        for _ in 2..k {
            term *= q;
            w += term;
        }
        Ok(w)
    })
}

/// `(log N)^alpha = exp(alpha log log N)`, defined for `N >= 3`.
pub fn log_power(n: u64, alpha: Complex64) -> Result<Complex64> {
    if n < 3 {
        return Err(Error::Precondition(format!("(log N)^alpha needs N >= 3, got {n}")));
    }
    Ok((alpha * (n as f64).ln().ln()).exp())
}

/// `p e^(2 pi i l / k)` for primes `p <= prime_limit` and `1 <= l <= k-1`.
pub fn forbidden_alphas(k: u32, prime_limit: u64) -> Vec<Complex64> {
    if prime_limit < 2 {
        return Vec::new();
    }
    let table = primes::sieve_primes(prime_limit).expect("limit >= 2");
    let mut out = Vec::new();
    for &p in table.primes() {
        for l in 1..k {
            out.push(root_of_unity(l, k) * p as f64);
        }
    }
    out
}

/// `e^(2 pi i l / k)`, exact at multiples of a quarter turn.
fn root_of_unity(l: u32, k: u32) -> Complex64 {
    let (l, k) = (l % k, k);
    if (4 * l) % k == 0 {
        return match 4 * l / k {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    Complex64::from_polar(1.0, TAU * l as f64 / k as f64)
}

/// Whether `alpha` is (to rounding) one of the forbidden values.
pub fn is_forbidden(k: u32, alpha: Complex64) -> bool {
    let r = alpha.norm();
    let p = r.round();
    if p < 2.0 || (r - p).abs() > 1e-9 * p || !primes::sieve_primes(p as u64).map(|t| t.contains(p as u64)).unwrap_or(false) {
        return false;
    }
    let q = alpha / p;
    (1..k).any(|l| (q - root_of_unity(l, k)).norm() < 1e-12)
}

/// `P(nu(p) = t)` for all `t`: `F_t(p) = q^t (1 - q) / (1 - q^k)`, `q = alpha/p`.
fn marginals_at(k: u32, alpha: Complex64, u: f64) -> Result<Vec<Complex64>> {
    let q = alpha / u;
    if q == Complex64::new(1.0, 0.0) {
        return Ok(vec![Complex64::new(1.0 / k as f64, 0.0); k as usize]);
    }
    let denominator = Complex64::new(1.0, 0.0) - q.powu(k);
    if denominator.norm() < 1e-14 {
        return Err(Error::Degenerate(format!("u^k = alpha^k at u = {u}, alpha = {alpha}")));
    }
    let base = (Complex64::new(1.0, 0.0) - q) / denominator;
    let mut out = Vec::with_capacity(k as usize);
    let mut power = Complex64::new(1.0, 0.0);
    for _ in 0..k {
        out.push(power * base);
        power *= q;
    }
    Ok(out)
}

/// `P(nu(p) = t) = alpha^t p^(k-1-t) (p - alpha) / (p^k - alpha^k)`.
pub fn nu_marginal(cfg: &EnsembleConfig, p: u64, t: u32) -> Result<Complex64> {
    if t >= cfg.k {
        return Err(Error::Precondition(format!("t = {t} must be below k = {}", cfg.k)));
    }
    if p > cfg.n || !primes::shared(p.max(2))?.contains(p) {
        return Err(Error::Precondition(format!("{p} is not a prime <= N = {}", cfg.n)));
    }
    Ok(marginals_at(cfg.k, cfg.alpha, p as f64)?[t as usize])
}

/// Coefficients `b(l)` of `F_t(u) = sum_l b(l) u^-l`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaurentCoeffs {
    pub k: u32,
    pub alpha: Complex64,
    pub t: u32,
    pub coefficients: Vec<Complex64>,
}

impl LaurentCoeffs {
    /// Partial sum of the expansion at `u`.
    pub fn eval(&self, u: Complex64) -> Complex64 {
        let w = u.inv();
        self.coefficients.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &b| acc * w + b)
    }
}

/// `b_0(l)`: `alpha^l` for `l = 0 mod k`, `-alpha^l` for `l = 1 mod k`, else 0.
fn b0(k: u32, alpha: Complex64, l: u32) -> Complex64 {
    match l % k {
        0 => alpha.powu(l),
        1 => -alpha.powu(l),
        _ => Complex64::new(0.0, 0.0),
    }
}

/// Closed-form coefficients, `b_t(l) = alpha^t b_0(l - t)`.
pub fn laurent_coeffs(k: u32, alpha: Complex64, t: u32, l_max: u32) -> Result<LaurentCoeffs> {
    if t >= k {
        return Err(Error::Precondition(format!("t = {t} must be below k = {k}")));
    }
    if l_max < k + 2 {
        return Err(Error::Precondition(format!("l_max = {l_max} must be at least k + 2")));
    }
    let at = alpha.powu(t);
    let coefficients =
        (0..=l_max).map(|l| if l < t { Complex64::new(0.0, 0.0) } else { at * b0(k, alpha, l - t) }).collect();
    Ok(LaurentCoeffs { k, alpha, t, coefficients })
}

/// Coefficients recovered numerically from values of `F_t` on the circle
/// `|u| = radius` by the trapezoid rule (a discrete Fourier transform in
/// `1/u`). The radius must exceed `|alpha|`.
pub fn laurent_coeffs_numeric(k: u32, alpha: Complex64, t: u32, l_max: u32, radius: f64) -> Result<LaurentCoeffs> {
    if radius <= alpha.norm() {
        return Err(Error::OutsideLaurentDomain { u: radius, modulus: alpha.norm() });
    }
    if t >= k {
        return Err(Error::Precondition(format!("t = {t} must be below k = {k}")));
    }
    let samples = 512usize.max(4 * l_max as usize);
    let r = 1.0 / radius;
    let mut values = Vec::with_capacity(samples);
    for m in 0..samples {
        let w = Complex64::from_polar(r, TAU * m as f64 / samples as f64);
        let q = alpha * w;
        let value = q.powu(t) * (Complex64::new(1.0, 0.0) - q) / (Complex64::new(1.0, 0.0) - q.powu(k));
        values.push(value);
    }
    let coefficients = (0..=l_max)
        .map(|l| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, v) in values.iter().enumerate() {
                acc += v * Complex64::from_polar(1.0, -TAU * (l as usize * m % samples) as f64 / samples as f64);
            }
            acc / (samples as f64 * r.powi(l as i32))
        })
        .collect();
    Ok(LaurentCoeffs { k, alpha, t, coefficients })
}

/// `sum_{j=0}^{min(l, k-1)} alpha^j b_0(l - j)`, which vanishes for `l >= 2`.
pub fn cancellation_check(k: u32, alpha: Complex64, l: u32) -> Result<Complex64> {
    if l < 2 {
        return Err(Error::Precondition(format!("l = {l} must be at least 2")));
    }
    Ok((0..=l.min(k - 1)).map(|j| alpha.powu(j) * b0(k, alpha, l - j)).sum())
}

/// Bound used to place `d*`: every Euler factor of the characteristic
/// function at `u` lies within `B(u)` of 1, for all `lambda` and `N`.
fn disk_bound(k: u32, modulus: f64, u: f64) -> f64 {
    let denominator = u.powi(k as i32) - modulus.powi(k as i32);
    if denominator <= 0.0 {
        return f64::INFINITY;
    }
    let mut sum = 0.0;
    for t in 1..k {
        sum += modulus.powi(t as i32) * u.powi((k - 1 - t) as i32) * (u + modulus) / denominator;
    }
    2.0 * sum
}

/// Threshold prime `d*(k, alpha)`: beyond it every factor `z(p)` of the
/// characteristic function and of the partition function lies in
/// `|z - 1| < 1/2`, for every `lambda` and `N`. Always `d* > |alpha|`.
pub fn threshold_prime(k: u32, alpha: Complex64) -> Result<u64> {
    let modulus = alpha.norm();
    let mut last_failing = 2u64;
    let mut above_alpha: Option<u64> = None;
    let mut limit = 1024u64.max((8.0 * modulus) as u64);
    loop {
        let table = primes::shared(limit)?;
        let mut settled = 0usize;
        for &p in table.up_to(limit) {
            let u = p as f64;
            if u > modulus && above_alpha.is_none() {
                above_alpha = Some(p);
            }
            let b = disk_bound(k, modulus, u);
            let z_bound: f64 = (1..k).map(|l| (modulus / u).powi(l as i32)).sum();
            if u <= modulus || b >= 0.5 || z_bound >= 0.5 {
                last_failing = p;
                settled = 0;
            } else {
                settled += 1;
            }
        }
        // the bound decreases in u once u > |alpha|, so a long passing run
        // at the end of the table settles the threshold
        if settled > 16 {
            break;
        }
        limit *= 4;
    }
    Ok(last_failing.max(above_alpha.unwrap_or(2)))
}

/// Finite-N characteristic function `E[e^(i lambda xi_N)]`.
pub fn ensemble_charfn(cfg: &EnsembleConfig, lambda: f64) -> Result<Complex64> {
    CharFn::new(cfg)?.eval(lambda)
}

/// Characteristic function at many `lambda`, parallel over `lambda`.
pub fn ensemble_charfn_many(cfg: &EnsembleConfig, lambdas: &[f64]) -> Result<Vec<Complex64>> {
    CharFn::new(cfg)?.eval_many(lambdas)
}

/// Precomputed prime data for repeated evaluation of the finite-N
/// characteristic function `prod_p sum_t F_t(p) e^(i lambda t log p / log N)`.
#[derive(Debug, Clone)]
pub struct CharFn {
    cfg: EnsembleConfig,
    table: Arc<PrimeTable>,
    count: usize,
    /// `log p / log N`.
    theta: Vec<f64>,
    d_star: u64,
}

impl CharFn {
    pub fn new(cfg: &EnsembleConfig) -> Result<Self> {
        marginals_check(cfg)?;
        let table = cfg.prime_table()?;
        let count = table.count_up_to(cfg.n);
        let inv_log_n = 1.0 / (cfg.n as f64).ln();
        let theta = table.primes()[..count].iter().map(|&p| (p as f64).ln() * inv_log_n).collect();
        let d_star = threshold_prime(cfg.k, cfg.alpha)?;
        Ok(CharFn { cfg: *cfg, table, count, theta, d_star })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.cfg
    }

    pub fn threshold(&self) -> u64 {
        self.d_star
    }

    /// Product split into the direct head (`p <= d*`) and the log tail.
    pub fn eval_product(&self, lambda: f64) -> Result<LogProduct> {
        let mut total = LogProduct::one();
        if lambda == 0.0 {
            return Ok(total);
        }
        let ps = &self.table.primes()[..self.count];
        let (k, alpha) = (self.cfg.k, self.cfg.alpha);
        for (chunk_p, chunk_t) in ps.chunks(CHUNK).zip(self.theta.chunks(CHUNK)) {
            let mut acc = LogProduct::one();
            for (&p, &theta) in chunk_p.iter().zip(chunk_t) {
                acc.push(p, self.d_star, charfn_factor_offset(k, alpha, p as f64, lambda * theta)?);
            }
            total = total.combine(acc);
        }
        Ok(total)
    }

    pub fn eval(&self, lambda: f64) -> Result<Complex64> {
        if lambda == 0.0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        Ok(self.eval_product(lambda)?.value())
    }

    /// Parallel over `lambda`; each value equals [`CharFn::eval`] exactly.
    pub fn eval_many(&self, lambdas: &[f64]) -> Result<Vec<Complex64>> {
        lambdas.par_iter().map(|&l| self.eval(l)).collect()
    }
}

fn marginals_check(cfg: &EnsembleConfig) -> Result<()> {
    if is_forbidden(cfg.k, cfg.alpha) && (cfg.alpha.norm().round() as u64) <= cfg.n {
        return Err(Error::Degenerate(format!(
            "alpha = {} makes the partition function vanish",
            cfg.alpha
        )));
    }
    Ok(())
}

/// `z(p) - 1 = sum_{t>=1} F_t(p) (e^(i t phase) - 1)` with `phase = lambda log p / log N`.
#[inline]
pub(crate) fn charfn_factor_offset(k: u32, alpha: Complex64, u: f64, phase: f64) -> Result<Complex64> {
    let q = alpha / u;
    let qk = q.powu(k);
    let denominator = Complex64::new(1.0, 0.0) - qk;
    if denominator.norm() < 1e-14 {
        if q == Complex64::new(1.0, 0.0) {
            let mut w = Complex64::new(0.0, 0.0);
            for t in 1..k {
                w += expm1_i(t as f64 * phase) / k as f64;
            }
            return Ok(w);
        }
        return Err(Error::Degenerate(format!("u^k = alpha^k at u = {u}, alpha = {alpha}")));
    }
    let base = (Complex64::new(1.0, 0.0) - q) / denominator;
    let mut w = Complex64::new(0.0, 0.0);
    let mut power = q;
    for t in 1..k {
        w += power * expm1_i(t as f64 * phase);
        power *= q;
    }
    Ok(w * base)
}

/// `Z(k, |alpha|, N) / |Z(k, alpha, N)|`, the trivial bound on `|phi_N|`.
pub fn trivial_charfn_bound(cfg: &EnsembleConfig) -> Result<f64> {
    let abs_cfg = cfg.with_alpha(Complex64::new(cfg.alpha.norm(), 0.0))?;
    let z_abs = partition_product(&abs_cfg)?;
    let z = partition_product(cfg)?;
    if z.head.norm() == 0.0 {
        return Err(Error::Degenerate("partition function vanishes".into()));
    }
    let log_ratio = z_abs.log_tail.re - z.log_tail.re;
    Ok(z_abs.head.norm() / z.head.norm() * log_ratio.exp())
}

/// Error kernel of the Abel-summation argument at real `u > |alpha|`, and
/// its bound `sum_j |alpha^j (e^(i lambda j log u / log N) - 1)| / u^(j+2)`.
pub fn error_kernel(cfg: &EnsembleConfig, u: f64, lambda: f64) -> Result<(Complex64, f64)> {
    let (k, alpha) = (cfg.k, cfg.alpha);
    if !(u > alpha.norm()) {
        return Err(Error::OutsideLaurentDomain { u, modulus: alpha.norm() });
    }
    let theta = u.ln() / (cfg.n as f64).ln();
    let q = alpha / u;
    // F_t = q^t / S(q), S = sum_{j<k} q^j; dF_t/du = -(t q^t S - q^(t+1) S') / (u S^2)
    let mut s = Complex64::new(0.0, 0.0);
    let mut ds = Complex64::new(0.0, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    for j in 0..k {
        s += power;
        if j + 1 < k {
            ds += power * (j + 1) as f64;
        }
        power *= q;
    }
    if s.norm() < 1e-300 {
        return Err(Error::Degenerate(format!("partition factor vanishes at u = {u}")));
    }
    let mut value = alpha / (u * u) * expm1_i(lambda * theta);
    let mut bound = 0.0;
    let mut qt = Complex64::new(1.0, 0.0);
    for t in 1..k {
        qt *= q;
        let derivative = -(qt * s * t as f64 - qt * q * ds) / (s * s * u);
        let oscillation = expm1_i(lambda * t as f64 * theta);
        value += derivative * oscillation;
        bound += (alpha.powu(t) * oscillation).norm() / u.powi(t as i32 + 2);
    }
    Ok((value, bound))
}

/// Estimates of the constant in `Z_N ~ C (log N)^alpha`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionConstantReport {
    pub k: u32,
    pub alpha: Complex64,
    pub n_grid: Vec<u64>,
    /// `Z_N / (log N)^alpha` along the grid.
    pub ratios: Vec<Complex64>,
    /// Successive differences `|r_{i+1} - r_i|`.
    pub increments: Vec<f64>,
    /// Linear extrapolation of the last two ratios to `1/log N = 0`.
    pub extrapolated: Complex64,
    /// `e^(alpha gamma) prod_{p <= N_max} z(p) (1 - 1/p)^alpha`, whose
    /// factors are `1 + O(1/p^2)`.
    pub convergent_product: Complex64,
    /// Named closed forms with their values and relative distances to the
    /// extrapolated value and to the convergent product.
    pub candidates: Vec<(String, f64, f64, f64)>,
    /// Name of the candidate within 1% of the extrapolated value, if any.
    pub supports: Option<String>,
}

/// Sequence `Z_N / (log N)^alpha` over `n_grid` with Richardson-style
/// extrapolation in `1/log N`.
pub fn partition_constant(k: u32, alpha: Complex64, n_grid: &[u64]) -> Result<PartitionConstantReport> {
    if is_forbidden(k, alpha) {
        return Err(Error::Degenerate(format!("alpha = {alpha} is a forbidden value for k = {k}")));
    }
    if alpha.norm() >= 2.0 {
        return Err(Error::Precondition(format!("|alpha| = {} must be below 2", alpha.norm())));
    }
    if n_grid.len() < 2 {
        return Err(Error::Precondition("the N grid needs at least two points".into()));
    }
    let mut grid = n_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let mut ratios = Vec::with_capacity(grid.len());
    for &n in &grid {
        let cfg = EnsembleConfig::new(k, alpha, n)?;
        ratios.push(partition_function(&cfg)? / log_power(n, alpha)?);
    }
    let increments = ratios.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    // linear in 1/log N through the two largest N
    let xs: Vec<f64> = grid.iter().map(|&n| 1.0 / (n as f64).ln()).collect();
    let m = xs.len();
    let extrapolated = neville_at_zero(&xs[m - 2..], &ratios[m - 2..]);

    let n_max = *grid.last().expect("non-empty");
    let cfg = EnsembleConfig::new(k, alpha, n_max)?;
    let table = cfg.prime_table()?;
    let d_star = threshold_prime(k, alpha)?;
    let corrected = euler_product(table.up_to(n_max), d_star, |p| {
        let q = alpha / p as f64;
        let mut z = Complex64::new(1.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for _ in 1..k {
            term *= q;
            z += term;
        }
        let mertens = (alpha * (-1.0 / p as f64).ln_1p()).exp();
        Ok(z * mertens - 1.0)
    })?;
    let convergent_product = corrected.value() * (alpha * EULER_GAMMA).exp();

    let mut candidates = vec![("exp(-gamma)".to_string(), (-EULER_GAMMA).exp())];
    if k == 2 && alpha == Complex64::new(1.0, 0.0) {
        candidates.push((
            "6 exp(gamma) / pi^2".to_string(),
            6.0 * EULER_GAMMA.exp() / (std::f64::consts::PI * std::f64::consts::PI),
        ));
    }
    let candidates: Vec<(String, f64, f64, f64)> = candidates
        .into_iter()
        .map(|(name, value)| {
            let to_extrapolated = (extrapolated - value).norm() / value;
            let to_product = (convergent_product - value).norm() / value;
            (name, value, to_extrapolated, to_product)
        })
        .collect();
    let supports = candidates
        .iter()
        .filter(|c| c.2 < 0.01)
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .map(|c| c.0.clone());
    Ok(PartitionConstantReport {
        k,
        alpha,
        n_grid: grid,
        ratios,
        increments,
        extrapolated,
        convergent_product,
        candidates,
        supports,
    })
}

/// Value at 0 of the interpolating polynomial through `(xs, ys)`.
fn neville_at_zero(xs: &[f64], ys: &[Complex64]) -> Complex64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (p[i] * (-xj) - p[i + 1] * (-xi)) / (xi - xj);
        }
    }
    p[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn threshold_for_alpha_one() {
        // B(p) = 2/(p-1) for k = 2, alpha = 1: fails through p = 5
        assert_eq!(threshold_prime(2, c(1.0, 0.0)).unwrap(), 5);
        assert!(threshold_prime(2, c(2.5, 0.0)).unwrap() > 2);
        assert!(threshold_prime(3, c(0.01, 0.0)).unwrap() >= 2);
    }

    #[test]
    fn expm1_i_small_argument() {
        let x = 1e-12;
        let v = expm1_i(x);
        assert!((v.im - x).abs() < 1e-28);
        assert!((v.re + 0.5 * x * x).abs() < 1e-36);
    }

    #[test]
    fn ln_1p_matches_direct_log() {
        for w in [c(1e-4, -2e-4), c(0.3, 0.1), c(-0.2, 0.0)] {
            assert!((ln_1p(w) - (w + 1.0).ln()).norm() < 1e-15);
        }
    }

    #[test]
    fn root_of_unity_exact_quarters() {
        assert_eq!(root_of_unity(1, 2), c(-1.0, 0.0));
        assert_eq!(root_of_unity(1, 4), c(0.0, 1.0));
        assert_eq!(root_of_unity(3, 4), c(0.0, -1.0));
    }

    #[test]
    fn forbidden_detection() {
        assert!(is_forbidden(2, c(-2.0, 0.0)));
        assert!(!is_forbidden(2, c(2.0, 0.0)));
        assert!(is_forbidden(4, c(0.0, 3.0)));
        assert!(!is_forbidden(3, c(1.0, 1.0)));
    }

    #[test]
    fn neville_recovers_polynomial() {
        let xs = [0.1, 0.2, 0.3];
        let ys: Vec<Complex64> = xs.iter().map(|&x| c(2.0 + 3.0 * x - x * x, x)).collect();
        assert!((neville_at_zero(&xs, &ys) - c(2.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn factorization_round_trip() {
        let cfg = EnsembleConfig::real(3, 1.0, 4).unwrap();
        let f = Factorization::of(&cfg, 12).unwrap();
        assert_eq!(f.exponents, vec![2, 1]);
        assert!(Factorization::of(&cfg, 8).is_err());
        assert!(Factorization::of(&cfg, 5).is_err());
    }
}
