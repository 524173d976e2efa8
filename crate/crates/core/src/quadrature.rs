//! Adaptive Gauss–Kronrod quadrature for complex-valued integrands, plus
//! Gauss–Legendre node generation for fixed composite rules.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use num_complex::Complex64;

use crate::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Settings for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Upper bound on the number of panels held at once.
    pub max_panels: usize,
    /// Number of equal panels the interval is split into before adapting.
    /// Oscillatory integrands should start with roughly one panel per period.
    pub initial_panels: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { abs_tol: 1e-12, rel_tol: 1e-12, max_panels: 4000, initial_panels: 1 }
    }
}

impl Options {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        Options { abs_tol, rel_tol, ..Default::default() }
    }

    /// Initial panel count for an integrand oscillating like `exp(i freq x)`.
    pub fn oscillatory(mut self, a: f64, b: f64, freq: f64) -> Self {
        let periods = (freq.abs() * (b - a).abs() / std::f64::consts::TAU).ceil();
        self.initial_panels = self.initial_panels.max(periods.min(1e5) as usize).max(1);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    pub abs_error: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// 21-point Kronrod estimate and `|K21 - G10|` on `[a, b]`.
pub fn gauss_kronrod21<F>(f: &F, a: f64, b: f64) -> (Complex64, f64)
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = Complex64::new(0.0, 0.0);
    for j in 0..10 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += sum * WGK[j];
        if j % 2 == 1 {
            gauss += sum * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).norm())
}

/// Adaptive integral of a complex-valued `f` over `[a, b]`.
///
/// Panels with the largest `|K21 - G10|` are bisected until the summed
/// estimate falls below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F>(f: F, a: f64, b: f64, opts: &Options) -> Result<QuadResult>
where
    F: Fn(f64) -> Complex64,
{
    if a == b {
        return Ok(QuadResult { value: Complex64::new(0.0, 0.0), abs_error: 0.0, evaluations: 0 });
    }
    let n0 = opts.initial_panels.max(1);
    let width = (b - a) / n0 as f64;
    let mut heap = BinaryHeap::with_capacity(2 * n0);
    let mut total = Complex64::new(0.0, 0.0);
    let mut total_err = 0.0;
    let mut evaluations = 0;
    for i in 0..n0 {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n0 { b } else { a + width * (i + 1) as f64 };
        let (value, error) = gauss_kronrod21(&f, lo, hi);
        evaluations += 21;
        total += value;
        total_err += error;
        heap.push(Panel { a: lo, b: hi, value, error });
    }
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.norm());
        if total_err <= target {
            break;
        }
        if heap.len() >= opts.max_panels {
            return Err(Error::ToleranceNotMet { requested: target, achieved: total_err });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel cannot be split further in binary64
            return Err(Error::ToleranceNotMet { requested: target, achieved: total_err });
        }
        let (lv, le) = gauss_kronrod21(&f, worst.a, mid);
        let (rv, re) = gauss_kronrod21(&f, mid, worst.b);
        evaluations += 42;
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Panel { a: mid, b: worst.b, value: rv, error: re });
    }
    // recompute the sum from the panels to shed accumulated update rounding
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = panels.iter().map(|p| p.value).sum();
    let abs_error = panels.iter().map(|p| p.error).sum();
    Ok(QuadResult { value, abs_error, evaluations })
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F>(f: F, a: f64, b: f64, opts: &Options) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let r = integrate(|x| Complex64::new(f(x), 0.0), a, b, opts)?;
    Ok((r.value.re, r.abs_error))
}

/// Integral over `[a, inf)` through the map `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F>(f: F, a: f64, opts: &Options) -> Result<QuadResult>
where
    F: Fn(f64) -> Complex64,
{
    integrate(
        |t| {
            if t >= 1.0 {
                return Complex64::new(0.0, 0.0);
            }
            let s = 1.0 - t;
            let v = f(a + t / s);
            if v.re == 0.0 && v.im == 0.0 {
                v
            } else {
                v / (s * s)
            }
        },
        0.0,
        1.0,
        opts,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_is_exact_for_degree_31_and_gauss_for_19() {
        // K21 integrates degree <= 31 exactly; G10 degree <= 19
        for deg in [0, 5, 19, 31] {
            let f = |x: f64| Complex64::new(x.powi(deg) + 1.0, 0.0);
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 } + 2.0;
            let (k, _) = gauss_kronrod21(&f, -1.0, 1.0);
            assert!((k.re - exact).abs() < 1e-14, "deg {deg}: {} vs {exact}", k.re);
        }
        let f = |x: f64| Complex64::new(x.powi(18), 0.0);
        let (_, err) = gauss_kronrod21(&f, -1.0, 1.0);
        assert!(err < 1e-14);
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let (v, _) = integrate_real(|x| x.sqrt(), 0.0, 1.0, &Options::default()).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_integral() {
        let lambda = 200.0;
        let opts = Options::with_tol(1e-13, 1e-13).oscillatory(0.0, 1.0, lambda);
        let r = integrate(|x| Complex64::new(0.0, lambda * x).exp(), 0.0, 1.0, &opts).unwrap();
        let exact = (Complex64::new(0.0, lambda).exp() - 1.0) / Complex64::new(0.0, lambda);
        assert!((r.value - exact).norm() < 1e-12);
    }

    #[test]
    fn semi_infinite() {
        let r = integrate_to_infinity(|x| Complex64::new((-x).exp(), 0.0), 0.0, &Options::default())
            .unwrap();
        assert!((r.value.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tolerance_failure_is_reported() {
        let opts = Options { max_panels: 4, ..Options::default() };
        let r = integrate(|x| Complex64::new(1.0 / x.sqrt(), 0.0), 0.0, 1.0, &opts);
        assert!(matches!(r, Err(Error::ToleranceNotMet { .. })));
    }

    #[test]
    fn legendre_nodes() {
        for n in [1, 2, 5, 16, 40] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            // exact for x^(2n-2)
            let d = 2 * n as i32 - 2;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d)).sum();
            assert!((s - 2.0 / (d as f64 + 1.0)).abs() < 1e-13, "n = {n}");
        }
    }
}
