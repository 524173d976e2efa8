use kfree_core::dickman::{
    charfn_limit, density_transform, h_constant, solve_rho, solve_rho_with_plateau, w_density, CharFnLimit,
};
use kfree_core::{Complex64, Error, EULER_GAMMA};

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn unit_weight_is_one_minus_log_on_first_segment() {
    let grid = solve_rho(1.0, 3.0, 1e-3).unwrap();
    assert!((grid.a0 - 1.0).abs() < 1e-14);
    for i in 0..=100 {
        let u = 1.0 + i as f64 / 100.0;
        assert!((grid.rho(u).unwrap() - (1.0 - u.ln())).abs() < 1e-13, "u={u}");
    }
}

#[test]
fn unit_weight_second_segment_matches_quadrature() {
    // rho(u) = 1 - ln u + int_2^u ln(t-1)/t dt on [2, 3]
    let grid = solve_rho(1.0, 3.0, 1e-3).unwrap();
    for u in [2.25, 2.5, 2.75, 3.0] {
        let oracle = 1.0 - f64::ln(u) + simpson(|t| f64::ln(t - 1.0) / t, 2.0, u, 2000);
        assert!((grid.rho(u).unwrap() - oracle).abs() < 1e-10, "u={u}");
    }
}

#[test]
fn rho_outside_grid_is_an_error() {
    let grid = solve_rho_with_plateau(1.0, 1.0, 4.0, 1e-3).unwrap();
    assert!(matches!(grid.rho(4.5), Err(Error::OutOfGrid { .. })));
}

#[test]
fn density_integrates_to_one() {
    for alpha in [0.5, 1.0, 1.5, 2.0, 3.0] {
        let grid = solve_rho_with_plateau(alpha, 1.0, 14.0, 1e-3).unwrap();
        // u = s^2 tames u^(alpha - 1) near zero
        let mass = simpson(
            |s| if s == 0.0 && alpha < 1.0 { 2.0 * w_at_origin(alpha, &grid) } else { 2.0 * s * w_density(alpha, s * s, &grid).unwrap() },
            0.0,
            14f64.sqrt(),
            20_000,
        );
        assert!((mass - 1.0).abs() < 1e-6, "alpha={alpha}: {mass}");
    }
}

/// Limit of `s w(s^2)` as `s -> 0` for `alpha < 1` is zero only if `alpha > 1/2`;
/// at `alpha = 1/2` it is the constant prefactor.
fn w_at_origin(alpha: f64, grid: &kfree_core::dickman::RhoGrid) -> f64 {
    let s = 1e-8f64;
    s * w_density(alpha, s * s, grid).unwrap()
}

#[test]
fn density_does_not_depend_on_plateau() {
    let a = solve_rho_with_plateau(1.5, 1.0, 5.0, 1e-3).unwrap();
    let b = solve_rho_with_plateau(1.5, 0.37, 5.0, 1e-3).unwrap();
    for u in [0.5, 1.5, 2.5, 4.0] {
        let (x, y) = (w_density(1.5, u, &a).unwrap(), w_density(1.5, u, &b).unwrap());
        assert!((x - y).abs() < 1e-13 * x.abs().max(1e-300));
    }
}

#[test]
fn density_transform_matches_limit_charfn() {
    for alpha in [0.5, 1.0, 2.0] {
        let grid = solve_rho_with_plateau(alpha, 1.0, 16.0, 1e-3).unwrap();
        for lambda in [0.0, 0.7, 3.0, 10.0] {
            let a = density_transform(&grid, lambda).unwrap();
            let b = charfn_limit(Complex64::new(alpha, 0.0), lambda);
            assert!((a - b).norm() < 1e-6, "alpha={alpha} lambda={lambda}: {a} vs {b}");
        }
    }
}

#[test]
fn limit_charfn_exponent_matches_quadrature() {
    for lambda in [0.5f64, 2.0, 9.0, -4.0] {
        let re = simpson(|v| if v == 0.0 { 0.0 } else { ((lambda * v).cos() - 1.0) / v }, 0.0, 1.0, 20_000);
        let im = simpson(|v| if v == 0.0 { lambda } else { (lambda * v).sin() / v }, 0.0, 1.0, 20_000);
        let e = CharFnLimit::exponent(lambda);
        assert!((e - Complex64::new(re, im)).norm() < 1e-10, "lambda={lambda}");
    }
}

#[test]
fn limit_charfn_decays_like_one_over_lambda() {
    // lambda phi(lambda) -> i e^-gamma for alpha = 1
    let lambda = 1e4;
    let v = charfn_limit(Complex64::new(1.0, 0.0), lambda) * lambda;
    let target = Complex64::new(0.0, (-EULER_GAMMA).exp());
    assert!((v - target).norm() < 1e-3, "{v}");
}

#[test]
fn limit_charfn_is_multiplicative_in_alpha() {
    let a = Complex64::new(0.4, 0.3);
    let b = Complex64::new(1.1, -0.2);
    for lambda in [0.3, 5.0, 40.0] {
        let lhs = charfn_limit(a + b, lambda);
        let rhs = charfn_limit(a, lambda) * charfn_limit(b, lambda);
        assert!((lhs - rhs).norm() < 1e-14);
    }
}

#[test]
fn selberg_constant_converges_in_prime_limit() {
    for alpha in [0.5, 1.5, 2.5] {
        let coarse = h_constant(alpha, 100_000).unwrap();
        let fine = h_constant(alpha, 10_000_000).unwrap();
        assert!((coarse - fine).abs() < 3e-7 * fine.abs(), "alpha={alpha}: {coarse} vs {fine}");
    }
}

#[test]
fn selberg_constant_matches_independent_product() {
    let alpha: f64 = 0.5;
    // direct product without the tail correction, over a trial-division prime list
    let mut log = 0.0;
    let mut p = 2u64;
    let mut count = 0;
    while p < 200_000 {
        if (2..).take_while(|d| d * d <= p).all(|d| p % d != 0) {
            let pf = p as f64;
            log += -(1.0 - alpha / pf).ln() + alpha * (1.0 - 1.0 / pf).ln();
            count += 1;
        }
        p += 1;
    }
    assert!(count > 17_000);
    let oracle = log.exp() / libm::tgamma(alpha);
    let h = h_constant(alpha, 10_000_000).unwrap();
    // truncation error of the oracle is about (alpha^2 - alpha)/(2 L ln L)
    assert!((h - oracle).abs() < 2e-6, "{h} vs {oracle}");
}

#[test]
fn selberg_constant_rejects_poles() {
    assert!(matches!(h_constant(3.0, 1000), Err(Error::Pole(_))));
    assert!(matches!(solve_rho(2.0, 3.0, 1e-3), Err(Error::Pole(_))));
    assert!(matches!(solve_rho(-0.5, 3.0, 1e-3), Err(Error::Domain { .. })));
}
