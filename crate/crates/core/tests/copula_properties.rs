use discrete_nnmp::copula::{bvn_cdf, discrete_pmf, CopulaFamily, CopulaParam};
use discrete_nnmp::stats::{integrate, integrate_lower_tail, norm_cdf, norm_pdf, norm_quantile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn parameter_grid(family: CopulaFamily) -> Vec<CopulaParam> {
    let values: &[f64] = match family {
        CopulaFamily::Gaussian => &[0.01, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.85, 0.92, 0.97],
        CopulaFamily::Gumbel => &[1.0, 1.2, 1.5, 2.0, 3.0, 5.0, 8.0, 15.0, 30.0, 50.0],
        CopulaFamily::Clayton => &[1e-6, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 60.0, 98.0],
    };
    values.iter().map(|&v| CopulaParam::new(family, v).unwrap()).collect()
}

fn unit_grid() -> Vec<f64> {
    (0..20).map(|k| (k as f64 + 0.5) / 20.0).collect()
}

#[test]
fn conditional_cdf_is_derivative_of_cdf() {
    let h = 1e-6;
    for family in CopulaFamily::ALL {
        for param in parameter_grid(family) {
            for &t1 in &unit_grid() {
                for &t2 in &unit_grid() {
                    let fd = (param.cdf(t1, t2 + h).unwrap() - param.cdf(t1, t2 - h).unwrap()) / (2.0 * h);
                    let exact = param.conditional_cdf(t1, t2).unwrap();
                    assert!(
                        (fd - exact).abs() < 1e-5,
                        "{family} {} t=({t1},{t2}): fd={fd} exact={exact}",
                        param.value()
                    );
                }
            }
        }
    }
}

#[test]
fn conditional_sample_inverts_conditional_cdf() {
    for family in CopulaFamily::ALL {
        for param in parameter_grid(family) {
            for &t1 in &unit_grid() {
                for &t2 in &unit_grid() {
                    let z = param.conditional_cdf(t1, t2).unwrap();
                    // Rounding z to a double moves the preimage by about eps / c(t1, t2);
                    // where that alone exceeds the tolerance, t1 is not recoverable.
                    let density = param.density(t1, t2).unwrap();
                    if f64::EPSILON / density > 1e-9 {
                        continue;
                    }
                    let back = param.conditional_sample(t2, z).unwrap();
                    assert!(
                        (back - t1).abs() < 1e-8,
                        "{family} {} t=({t1},{t2}) z={z} back={back}",
                        param.value()
                    );
                }
            }
        }
    }
}

#[test]
fn conditional_sampler_matches_conditional_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = [
        (CopulaFamily::Gaussian, 0.8, 0.3),
        (CopulaFamily::Gumbel, 4.0, 0.7),
        (CopulaFamily::Gumbel, 50.0, 0.2),
        (CopulaFamily::Clayton, 3.0, 0.15),
        (CopulaFamily::Clayton, 98.0, 0.9),
    ];
    for (family, value, t2) in cases {
        let param = CopulaParam::new(family, value).unwrap();
        let n = 100_000;
        let mut draws: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = rng.random_range(f64::EPSILON..1.0);
                param.conditional_sample(t2, z).unwrap()
            })
            .collect();
        draws.sort_by(f64::total_cmp);
        let mut sup: f64 = 0.0;
        for (k, &x) in draws.iter().enumerate() {
            let f = param.conditional_cdf(x, t2).unwrap();
            sup = sup
                .max((f - k as f64 / n as f64).abs())
                .max((f - (k + 1) as f64 / n as f64).abs());
        }
        assert!(sup < 0.02, "{family} {value}: sup distance {sup}");
    }
}

#[test]
fn densities_integrate_to_one() {
    // Integrate on the normal scale, t = Φ(x), which removes the corner singularities.
    let cases = [
        (CopulaFamily::Gaussian, 0.7),
        (CopulaFamily::Gumbel, 2.5),
        (CopulaFamily::Clayton, 1.5),
    ];
    for (family, value) in cases {
        let param = CopulaParam::new(family, value).unwrap();
        let inner = |x: f64| {
            let t1 = norm_cdf(x);
            integrate(
                |y: f64| {
                    let t2 = norm_cdf(y);
                    if t1 <= 0.0 || t1 >= 1.0 || t2 <= 0.0 || t2 >= 1.0 {
                        return 0.0;
                    }
                    param.density(t1, t2).unwrap() * norm_pdf(x) * norm_pdf(y)
                },
                -9.0,
                9.0,
                1e-10,
            )
        };
        let total = integrate(inner, -9.0, 9.0, 1e-9);
        assert!((total - 1.0).abs() < 1e-6, "{family}: {total}");
    }
}

#[test]
fn gaussian_density_matches_normal_scale_formula() {
    let rho: f64 = 0.7;
    let param = CopulaParam::new(CopulaFamily::Gaussian, rho).unwrap();
    let x = norm_quantile(0.9);
    let expect = (-(rho * rho * (x * x + x * x) - 2.0 * rho * x * x) / (2.0 * (1.0 - rho * rho))).exp()
        / (1.0 - rho * rho).sqrt();
    assert!((param.density(0.9, 0.9).unwrap() - expect).abs() < 1e-12);
}

#[test]
fn clayton_and_gumbel_cdf_closed_forms() {
    let c = CopulaParam::new(CopulaFamily::Clayton, 2.0).unwrap();
    let expect = (0.3f64.powi(-2) + 0.8f64.powi(-2) - 1.0).powf(-0.5);
    assert!((c.cdf(0.3, 0.8).unwrap() - expect).abs() < 1e-15);
    let d = 3.0 * (0.3f64 * 0.8).powf(-3.0) * (0.3f64.powi(-2) + 0.8f64.powi(-2) - 1.0).powf(-2.5);
    assert!((c.density(0.3, 0.8).unwrap() - d).abs() < 1e-12 * d);

    let g = CopulaParam::new(CopulaFamily::Gumbel, 2.0).unwrap();
    let (a, b) = (-(0.3f64.ln()), -(0.8f64.ln()));
    let expect = (-(a * a + b * b).sqrt()).exp();
    assert!((g.cdf(0.3, 0.8).unwrap() - expect).abs() < 1e-15);
}

#[test]
fn bvn_matches_quadrature() {
    let rho: f64 = 0.6;
    let s = (1.0 - rho * rho).sqrt();
    let q = integrate_lower_tail(|y| norm_pdf(y) * norm_cdf((1.5 - rho * y) / s), -0.3, 1e-14);
    assert!((bvn_cdf(1.5, -0.3, rho) - q).abs() < 1e-9);
    for &(x, y, r) in &[
        (-2.0, 1.0, 0.3),
        (0.7, 0.2, 0.95),
        (-3.5, -3.0, 0.99),
        (2.0, -1.0, -0.4),
    ] {
        let s = (1.0f64 - r * r).sqrt();
        let q = integrate_lower_tail(|v| norm_pdf(v) * norm_cdf((x - r * v) / s), y, 1e-14);
        assert!((bvn_cdf(x, y, r) - q).abs() < 1e-10, "({x},{y},{r})");
    }
}

fn poisson_cdf(lambda: f64) -> impl Fn(i64) -> f64 {
    move |k: i64| {
        if k < 0 {
            return 0.0;
        }
        let mut term = (-lambda).exp();
        let mut s = term;
        for j in 1..=k {
            term *= lambda / j as f64;
            s += term;
        }
        s.min(1.0)
    }
}

#[test]
fn discrete_pmf_sums_and_marginalizes() {
    let f = poisson_cdf(5.0);
    let rho = CopulaParam::new(CopulaFamily::Gaussian, 0.9).unwrap();
    let mut total = 0.0;
    for u in 0..=60 {
        for v in 0..=60 {
            total += discrete_pmf(&rho, &f, &f, u, v).unwrap();
        }
    }
    assert!((total - 1.0).abs() < 1e-8, "{total}");

    for family in CopulaFamily::ALL {
        for param in parameter_grid(family) {
            let mut total = 0.0;
            for v in 0..=40 {
                let mut col = 0.0;
                for u in 0..=40 {
                    col += discrete_pmf(&param, &f, &f, u, v).unwrap();
                }
                let g = f(v) - f(v - 1);
                assert!((col - g).abs() < 1e-9, "{family} {} v={v}", param.value());
                total += col;
            }
            assert!((total - 1.0).abs() < 1e-8);
        }
    }
}

#[test]
fn discrete_pmf_rejects_decreasing_cdf() {
    let param = CopulaParam::new(CopulaFamily::Clayton, 1.0).unwrap();
    let bad = |k: i64| if k < 0 { 0.0 } else { 1.0 / (k as f64 + 1.0) };
    let ok = poisson_cdf(2.0);
    assert!(discrete_pmf(&param, bad, ok, 2, 1).is_err());
}
