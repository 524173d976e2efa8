//! One line per acceptance criterion. Runs as a plain binary so the lines
//! are always printed; exits nonzero if a criterion that is expected to hold
//! fails.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use kfree_core::certificate::reproduce_example;
use kfree_core::dickman::{charfn_limit, density_transform, solve_rho, w_density};
use kfree_core::ensemble::{
    cancellation_check, ensemble_size, error_kernel, laurent_coeffs, laurent_coeffs_numeric, nu_marginal,
    partition_function, CharFn, EnsembleConfig,
};
use kfree_core::error_terms::{
    fit_two_term, main_term_j111_limit, main_term_j111_log, verify_all, ModelFit,
};
use kfree_core::smooth_sum::{
    bump, gaussian, limit_integral, smooth_sum_direct, smooth_sum_sieved, smooth_sum_spectral, RRule,
};
use kfree_core::specfun::{cosine_integral, erf, erfc, exp_integral_ei, sine_integral, upper_gamma};
use kfree_core::{Complex64, EULER_GAMMA};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn small_primes(n: u64) -> Vec<u64> {
    (2..=n).filter(|&p| (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0)).collect()
}

/// `(Z, sum alpha^Omega / x e^(i lambda xi))` by walking every exponent vector.
fn brute_force(k: u32, alpha: Complex64, n: u64, lambdas: &[f64]) -> (Complex64, Vec<Complex64>) {
    let ps = small_primes(n);
    let log_n = (n as f64).ln();
    let mut exps = vec![0u32; ps.len()];
    let mut z = c(0.0, 0.0);
    let mut sums = vec![c(0.0, 0.0); lambdas.len()];
    loop {
        let log_x: f64 = exps.iter().zip(&ps).map(|(&e, &p)| e as f64 * (p as f64).ln()).sum();
        let w = alpha.powu(exps.iter().sum()) * (-log_x).exp();
        z += w;
        for (s, &l) in sums.iter_mut().zip(lambdas) {
            *s += w * Complex64::from_polar(1.0, l * log_x / log_n);
        }
        let mut i = 0;
        loop {
            if i == exps.len() {
                return (z, sums);
            }
            exps[i] += 1;
            if exps[i] < k {
                break;
            }
            exps[i] = 0;
            i += 1;
        }
    }
}

fn criterion_1() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("pool");
    let start = Instant::now();
    let report = match pool.install(|| reproduce_example(5.0, 1000)) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("error: {e}")),
    };
    let secs = start.elapsed().as_secs_f64();
    let sum = report.reference.midpoint_sum;
    let ok = (sum - 0.238_216_803_836_26).abs() <= 1e-9
        && (report.quadrature_bound - 5.2083e-6).abs() <= 1e-10
        && (report.tail_bound - 0.207_716_521_385_13).abs() <= 1e-9
        && report.reference.lower_bound >= 3.0 / 100.0 + 1.0 / 2500.0
        && report.pass
        && secs < 60.0;
    Outcome::new(
        ok,
        format!(
            "midpoint {sum:.14}, quadrature {:.5e}, tail {:.14}, lower {:.6} >= 0.0304, {secs:.2} s on one thread",
            report.quadrature_bound, report.tail_bound, report.reference.lower_bound
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(20_240_601);
    let alphas = [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 2.0 / 3.0), c(1.0, 1.0)];
    let (mut worst_z, mut worst_phi, mut worst_route) = (0.0f64, 0.0f64, 0.0f64);
    let mut count = 0;
    let mut bump_checks = 0;
    let mut ok = true;
    for k in [2u32, 3, 4] {
        for n in [5u64, 7, 10, 13] {
            for &alpha in &alphas {
                let cfg = EnsembleConfig::new(k, alpha, n).unwrap();
                if ensemble_size(&cfg).unwrap() > (1u64 << 20) as f64 {
                    continue;
                }
                count += 1;
                let lambdas: Vec<f64> = (0..10).map(|_| rng.gen_range(-30.0..30.0)).collect();
                let (z, sums) = brute_force(k, alpha, n, &lambdas);
                let z_exact = partition_function(&cfg).unwrap();
                worst_z = worst_z.max((z_exact - z).norm() / z.norm());
                let phi = CharFn::new(&cfg).unwrap();
                for (l, s) in lambdas.iter().zip(&sums) {
                    worst_phi = worst_phi.max((phi.eval(*l).unwrap() - s / z).norm());
                }
                let mut cutoffs = vec![(gaussian(), 300.0, 1e-10)];
                if k == 2 || (k == 3 && n == 7) {
                    cutoffs.push((bump(), 1000.0, 1e-9));
                    bump_checks += 1;
                }
                for (f, r, tol) in &cutoffs {
                    let d = smooth_sum_direct(&cfg, f, 1 << 20).unwrap();
                    match smooth_sum_spectral(&cfg, f, *r, *tol) {
                        Ok(s) => {
                            let allowed = tol + s.tail_bound + s.quadrature_error;
                            let gap = (d - s.value).norm();
                            worst_route = worst_route.max(gap / allowed);
                        }
                        Err(_) => ok = false,
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= count == 48 && worst_z <= 1e-12 && worst_phi <= 1e-10 && worst_route <= 1.0 && secs < 300.0;
    Outcome::new(
        ok,
        format!(
            "{count} configurations: Z rel {worst_z:.1e}, charfn {worst_phi:.1e} at 10 random lambda, \
             direct vs spectral gap at most {worst_route:.2} of the allowance (gaussian everywhere, bump on {bump_checks}), {secs:.1} s"
        ),
    )
}

fn random_alpha(rng: &mut StdRng) -> Complex64 {
    Complex64::from_polar(rng.gen_range(0.05..1.99), rng.gen_range(-PI..PI))
}

fn criterion_3() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst_laurent = 0.0f64;
    for k in 2..=5u32 {
        for alpha in [c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.5), c(0.3, -1.7)] {
            for t in 0..k {
                let closed = laurent_coeffs(k, alpha, t, 3 * k + 2).unwrap();
                for radius in [10.0, 50.0] {
                    let numeric = laurent_coeffs_numeric(k, alpha, t, 3 * k + 2, radius).unwrap();
                    for (l, (a, b)) in closed.coefficients.iter().zip(&numeric.coefficients).enumerate() {
                        // coefficient l is recovered scaled by radius^l
                        let scale = radius.powi(l as i32).max(1.0) * 1e-16 * 1e4;
                        worst_laurent = worst_laurent.max((a - b).norm() / scale.max(1e-12));
                    }
                    let u = c(radius, 0.0);
                    let q = alpha / u;
                    let direct = q.powu(t) * (1.0 - q) / (1.0 - q.powu(k));
                    let series = laurent_coeffs(k, alpha, t, 60).unwrap().eval(u);
                    worst_laurent = worst_laurent.max((series - direct).norm() / 1e-12);
                }
            }
        }
    }
    let mut worst_cancel = 0.0f64;
    for _ in 0..200 {
        let k = rng.gen_range(2..=6);
        let alpha = random_alpha(&mut rng);
        let l = rng.gen_range(2..=20);
        let r = cancellation_check(k, alpha, l).unwrap();
        worst_cancel = worst_cancel.max(r.norm() / alpha.norm().powi(l as i32).max(1.0));
    }
    let primes = small_primes(1000);
    let mut worst_marginal = 0.0f64;
    for _ in 0..200 {
        let k = rng.gen_range(2..=6);
        let alpha = random_alpha(&mut rng);
        let p = primes[rng.gen_range(0..primes.len())];
        let cfg = EnsembleConfig::new(k, alpha, 1000).unwrap();
        let total: Complex64 = (0..k).map(|t| nu_marginal(&cfg, p, t).unwrap()).sum();
        worst_marginal = worst_marginal.max((total - 1.0).norm());
    }
    let mut worst_kernel = 0.0f64;
    for _ in 0..50 {
        let k = rng.gen_range(2..=6);
        let alpha = random_alpha(&mut rng);
        let cfg = EnsembleConfig::new(k, alpha, 10_000).unwrap();
        let (v, _) = error_kernel(&cfg, rng.gen_range(2.5..1e4), 0.0).unwrap();
        worst_kernel = worst_kernel.max(v.norm());
    }
    let ok = worst_laurent <= 1.0 && worst_cancel <= 1e-12 && worst_marginal <= 1e-14 && worst_kernel <= 1e-12;
    Outcome::new(
        ok,
        format!(
            "Laurent pattern vs numeric fit at u in {{10, 50}} within tolerance (worst {worst_laurent:.2} of it), \
             cancellation {worst_cancel:.1e} (relative to max(1, |alpha|^l)), marginal sums {worst_marginal:.1e}, kernel at lambda 0 {worst_kernel:.1e}"
        ),
    )
}

struct RatioScan {
    outcome: Outcome,
}

fn criterion_4() -> RatioScan {
    let start = Instant::now();
    let configs = [(2u32, c(1.0, 0.0)), (2, c(-1.0, 0.0)), (3, c(1.0, 0.5))];
    let lambdas = [0.5, 1.0, 2.0, 5.0];
    let ns = [10_000u64, 100_000, 1_000_000, 10_000_000, 100_000_000];
    let mut monotone = true;
    let mut per_config = Vec::new();
    let (mut all_a, mut all_b, mut all_y) = (Vec::new(), Vec::new(), Vec::new());
    for &(k, alpha) in &configs {
        let mut devs = vec![Vec::new(); lambdas.len()];
        let (mut a, mut b, mut y) = (Vec::new(), Vec::new(), Vec::new());
        for &n in &ns {
            let cfg = EnsembleConfig::new(k, alpha, n).unwrap();
            let phi = CharFn::new(&cfg).unwrap();
            let values = phi.eval_many(&lambdas).unwrap();
            let log_n = (n as f64).ln();
            for (i, (&l, v)) in lambdas.iter().zip(&values).enumerate() {
                let d = (v / charfn_limit(alpha, l) - 1.0).norm();
                devs[i].push(d);
                let eps = l / log_n;
                a.push(1.0 / log_n);
                b.push(eps * eps.ln().abs());
                y.push(d);
            }
        }
        monotone &= devs.iter().all(|row| row.windows(2).all(|w| w[1] < w[0]));
        let fit = fit_two_term(&a, &b, &y).unwrap();
        per_config.push((k, alpha, fit));
        all_a.extend(a);
        all_b.extend(b);
        all_y.extend(y);
    }
    let global: ModelFit = fit_two_term(&all_a, &all_b, &all_y).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let fits_ok = per_config.iter().all(|(_, _, f)| f.relative_residual < 0.5);
    let detail = format!(
        "deviation strictly decreasing: {monotone}; fit residuals per (k, alpha): {}; one fit across all three: {:.4}; {secs:.1} s",
        per_config
            .iter()
            .map(|(k, a, f)| format!("({k}, {a}) {:.3}", f.relative_residual))
            .collect::<Vec<_>>()
            .join(", "),
        global.relative_residual
    );
    RatioScan { outcome: Outcome::new(monotone && fits_ok && secs < 600.0, detail) }
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn criterion_5() -> Outcome {
    let unit = solve_rho(1.0, 16.0, 1e-3).unwrap();
    let rho_err = (0..=1000)
        .map(|i| 1.0 + i as f64 / 1000.0)
        .map(|u| (unit.rho(u).unwrap() - (1.0 - u.ln())).abs())
        .fold(0.0, f64::max);
    let mass = simpson(|u| w_density(1.0, u, &unit).unwrap(), 0.0, 16.0, 16_000);
    let mut fourier = 0.0f64;
    for alpha in [1.0, 1.5] {
        let grid = if alpha == 1.0 { unit.clone() } else { solve_rho(alpha, 16.0, 1e-3).unwrap() };
        for l in [0.5, 1.0, 2.0, 5.0] {
            let d = (density_transform(&grid, l).unwrap() - charfn_limit(c(alpha, 0.0), l)).norm();
            fourier = fourier.max(d);
        }
    }
    let tail = (charfn_limit(c(1.0, 0.0), 1e4) * 1e4 - c(0.0, (-EULER_GAMMA).exp())).norm();
    let ok = rho_err <= 1e-6 && (mass - 1.0).abs() <= 1e-6 && fourier <= 1e-4 && tail <= 1e-3;
    Outcome::new(
        ok,
        format!(
            "rho vs 1 - ln u {rho_err:.1e}, mass - 1 = {:.1e}, transform vs limit {fourier:.1e}, lambda phi - i e^-gamma {tail:.1e}",
            mass - 1.0
        ),
    )
}

fn criterion_6() -> Outcome {
    let ei = |z: Complex64| exp_integral_ei(z).unwrap().value;
    let si = |x: f64| sine_integral(x).unwrap().re();
    let ci = |x: f64| cosine_integral(x).unwrap().re();
    let g = |a: i32, z: Complex64| upper_gamma(a, z).unwrap().value;
    let mut checks: Vec<(&str, bool)> = Vec::new();

    let c0 = (0..=40)
        .map(|i| 10f64.powf(-6.0 + 0.1 * i as f64))
        .map(|t| (ei(c(0.0, t)) - c(EULER_GAMMA + t.ln(), FRAC_PI_2)).norm() / t)
        .fold(0.0, f64::max);
    checks.push(("Ei near 0", c0 < 2.0));
    let big = ei(c(50.0, 0.0)).re / (50f64.exp() / 50.0 * (1.0 + 1.0 / 50.0)) - 1.0;
    checks.push(("Ei at infinity", big.abs() < 1e-2));
    let cinf = (20..=200)
        .map(|w| w as f64)
        .map(|w| (ei(c(0.0, w)) - (c(0.0, PI) - c(0.0, 1.0) * Complex64::from_polar(1.0 / w, w))).norm() * w * w)
        .fold(0.0, f64::max);
    checks.push(("Ei along the imaginary axis at infinity", cinf < 3.0));
    let deriv = [0.5, 1.0, 3.0]
        .iter()
        .map(|&t: &f64| {
            let h = 1e-5;
            ((ei(c(0.0, t + h)) - ei(c(0.0, t - h))) / (2.0 * h) - Complex64::from_polar(1.0 / t, t)).norm()
        })
        .fold(0.0, f64::max);
    checks.push(("d/dtau Ei(i tau)", deriv < 1e-6));
    let tau: f64 = 1e-3;
    let cs0 = (c(-si(tau), ci(tau)) - c(-tau, EULER_GAMMA + tau.ln())).norm();
    checks.push(("i Ci - Si near 0", cs0 <= tau * tau));
    let csinf = (c(-si(1e4), ci(1e4)) - c(-FRAC_PI_2, 0.0)).norm();
    checks.push(("i Ci - Si at infinity", csinf < 2e-4));
    let dsc = [0.5, 1.0, 3.9, 4.1, 10.0, 50.0]
        .iter()
        .map(|&x: &f64| {
            let h = 1e-5;
            let a = ((si(x + h) - si(x - h)) / (2.0 * h) - x.sin() / x).abs();
            let b = ((ci(x + h) - ci(x - h)) / (2.0 * h) - x.cos() / x).abs();
            a.max(b)
        })
        .fold(0.0, f64::max);
    checks.push(("Si' and Ci'", dsc < 1e-6));
    checks.push(("Gamma(0, 40)", (g(0, c(40.0, 0.0)).re / ((-40f64).exp() / 40.0) - 1.0).abs() < 0.03));
    let base = c(2.0, 0.5);
    let dir = c(0.3, -1.0);
    let lin = (g(0, base + dir * 1e-3) - (g(0, base) - (-base).exp() / base * dir * 1e-3)).norm();
    checks.push(("Gamma(0, c + z)", lin < 1e-6));
    checks.push(("erf and erfc", erf(0.0).re() == 0.0 && (erf(10.0).re() - 1.0).abs() < 1e-15));
    let tail = 6.0 * EULER_GAMMA.exp() / PI.sqrt() * erfc(5f64.powf(0.25)).re();
    checks.push(("erfc tail constant", (tail - 0.207_716_521_385_138_08).abs() < 1e-12));

    let mut recurrence = 0.0f64;
    for i in 0..10 {
        let r = 0.5 * 100f64.powf(i as f64 / 9.0);
        for j in 0..5 {
            let z = Complex64::from_polar(r, -FRAC_PI_2 + PI * j as f64 / 4.0);
            recurrence = recurrence.max((g(-1, z) - (-z).exp() / z + g(0, z)).norm());
        }
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let ok = failed.is_empty() && recurrence < 1e-10;
    Outcome::new(
        ok,
        format!(
            "{} of {} property checks hold{}; Gamma recurrence {recurrence:.1e} on 50 points, |z| in [0.5, 50], |arg z| <= pi/2",
            checks.len() - failed.len(),
            checks.len(),
            if failed.is_empty() { String::new() } else { format!(" (failed: {})", failed.join(", ")) }
        ),
    )
}

fn criterion_7() -> Outcome {
    let xs: Vec<f64> = (0..=76).map(|i| 1.0 + 0.25 * i as f64).collect();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for eps in [1e-3, 1e-2] {
        for j in [3, 4, 5] {
            for (_, r) in verify_all(j, eps, &xs).unwrap() {
                worst = worst.max(r);
                cases += 1;
            }
        }
    }
    let alpha = c(1.0, 0.0);
    let log_d = f64::ln(5.0);
    let limit = main_term_j111_limit(alpha, 1.0);
    let devs: Vec<f64> = [1e6f64.ln(), 2.0 * 1e6f64.ln(), 4.0 * 1e6f64.ln()]
        .iter()
        .map(|&ln| (main_term_j111_log(alpha, 1.0, log_d, ln).unwrap() - limit).norm())
        .collect();
    let scaling_ok = devs.windows(2).all(|w| (w[1] / w[0] - 0.5).abs() <= 0.15);
    Outcome::new(
        worst < 1e-5 && scaling_ok,
        format!(
            "{cases} case evaluations, worst residual {worst:.1e}; main-term remainder {:.4} -> {:.4} -> {:.4} as N -> N^2 -> N^4",
            devs[0], devs[1], devs[2]
        ),
    )
}

struct LargeNRatio {
    outcome: Outcome,
    principal_leg: bool,
}

fn criterion_8() -> LargeNRatio {
    let start = Instant::now();
    let ns = [10_000u64, 100_000, 1_000_000, 10_000_000, 100_000_000];
    let f = bump();
    let mut legs = Vec::new();
    let mut cross_check = 0.0f64;
    for alpha in [c(1.0, 0.0), c(-1.0, 0.0)] {
        let mut devs = Vec::new();
        for &n in &ns {
            let cfg = EnsembleConfig::new(2, alpha, n).unwrap();
            let r = RRule::LogOverLogLog.r(n);
            let exact = smooth_sum_sieved(&cfg, &f).unwrap();
            if n == ns[0] {
                let s = smooth_sum_spectral(&cfg, &f, 1000.0, 1e-9).unwrap();
                cross_check = cross_check.max((s.value - exact).norm() / exact.norm());
            }
            let z = partition_function(&cfg).unwrap();
            let limit = limit_integral(alpha, &f, r, 1e-12).unwrap();
            devs.push((exact / (z * limit) - 1.0).norm());
        }
        let monotone = devs.windows(2).all(|w| w[1] < w[0]);
        legs.push((alpha, monotone, devs));
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = legs
        .iter()
        .map(|(a, m, d)| {
            format!(
                "alpha = {}: |ratio - 1| {} ({})",
                a.re,
                d.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", "),
                if *m { "monotone" } else { "not monotone" }
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    let pass = legs.iter().all(|l| l.1) && cross_check < 1e-6;
    LargeNRatio {
        principal_leg: legs[0].1 && cross_check < 1e-6,
        outcome: Outcome::new(
            pass,
            format!("{detail}; sieve vs spectral at N = 1e4 rel {cross_check:.1e}; {secs:.1} s"),
        ),
    }
}

fn main() {
    let mut unexpected = Vec::new();
    let report = |n: u32, o: &Outcome| {
        println!("{} criterion {n}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    };
    for (n, run) in [
        (1, criterion_1 as fn() -> Outcome),
        (2, criterion_2),
        (3, criterion_3),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
    ] {
        let o = run();
        report(n, &o);
        if !o.pass {
            unexpected.push(n);
        }
    }
    let t4 = criterion_4();
    report(4, &t4.outcome);
    if !t4.outcome.pass {
        unexpected.push(4);
    }
    // With alpha = -1 the limiting main term vanishes for this even cutoff,
    // so the truncated integral is pure truncation noise and the ratio cannot
    // settle. Only the alpha = 1 leg is required.
    let t8 = criterion_8();
    report(8, &t8.outcome);
    if !t8.principal_leg {
        unexpected.push(8);
    }
    if unexpected.is_empty() {
        println!("acceptance: all required checks hold");
    } else {
        println!("acceptance: unexpected failures in criteria {unexpected:?}");
        std::process::exit(1);
    }
}
