use discrete_nnmp::copula::{CopulaFamily, CopulaSpec};
use discrete_nnmp::geom::{Location, OrderedReferenceSet};
use discrete_nnmp::marginal::{CountDist, Covariates, MarginalParams};
use discrete_nnmp::simulate::{
    exponential_cov_factor, gp_sample, gp_sample_with, grid_sites, nnmp_forward_sample, sequential_joint_pmf,
    sglmm_counts, sglmm_dataset, skew_field_counts, skew_field_dataset, ForwardMode, NnmpParams, SglmmConfig,
    SkewFieldConfig, GRID_RESOLUTION,
};
use discrete_nnmp::weights::WeightParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tv_against(counts: &[u64], pmf: impl Fn(u64) -> f64) -> f64 {
    let mut h = vec![0usize; 200];
    for &c in counts {
        h[c as usize] += 1;
    }
    let n = counts.len() as f64;
    let mut mass = 0.0;
    let mut tv = 0.0;
    for (y, &k) in h.iter().enumerate() {
        let p = pmf(y as u64);
        mass += p;
        tv += (k as f64 / n - p).abs();
    }
    0.5 * (tv + 1.0 - mass)
}

#[test]
fn single_site_gp_has_the_stated_variance() {
    let site = [Location::new(0.3, 0.3)];
    let draws: Vec<f64> = (0..20_000).map(|s| gp_sample(&site, 0.1, 2.5, s).unwrap()[0]).collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 3.0 * (2.5 / n).sqrt(), "{mean}");
    // sd of a sample variance is about var * sqrt(2 / n).
    assert!((var - 2.5).abs() < 4.0 * 2.5 * (2.0 / n).sqrt(), "{var}");
}

#[test]
fn nearly_coincident_sites_draw_nearly_equal_values() {
    let eps = 1e-4;
    let sites = [Location::new(0.5, 0.5), Location::new(0.5 + eps, 0.5)];
    let (range, var) = (0.1, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 20_000;
    let diffs: Vec<f64> = (0..n)
        .map(|_| {
            let z = gp_sample_with(&sites, range, var, &mut rng).unwrap();
            z[0] - z[1]
        })
        .collect();
    let dvar = diffs.iter().map(|d| d * d).sum::<f64>() / n as f64;
    let expected = 2.0 * var * (1.0 - (-eps / range).exp());
    assert!((dvar / expected - 1.0).abs() < 0.1, "{dvar} vs {expected}");
}

#[test]
fn gp_sample_covariance_matches_the_kernel() {
    let sites = grid_sites(500, GRID_RESOLUTION, 3).unwrap();
    let (range, var) = (0.1, 1.0);
    let factor = exponential_cov_factor(&sites, range, var).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 10_000;
    let m = sites.len();
    // Entries checked: the diagonal, the first row and each site with its successor.
    let mut pairs: Vec<(usize, usize)> = (0..m).map(|j| (j, j)).collect();
    pairs.extend((1..m).map(|k| (0, k)));
    pairs.extend((1..m - 1).map(|j| (j, j + 1)));
    let mut acc = vec![0.0; pairs.len()];
    let mut z = nalgebra::DVector::zeros(m);
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        let x = &factor * &z;
        for (a, &(j, k)) in acc.iter_mut().zip(&pairs) {
            *a += x[j] * x[k];
        }
    }
    let kern = |j: usize, k: usize| var * (-sites[j].distance(&sites[k]) / range).exp();
    for (a, &(j, k)) in acc.iter().zip(&pairs) {
        let est = a / n as f64;
        let se = ((kern(j, j) * kern(k, k) + kern(j, k).powi(2)) / n as f64).sqrt();
        assert!(
            (est - kern(j, k)).abs() < 4.0 * se,
            "({j},{k}): {est} vs {}",
            kern(j, k)
        );
    }
}

#[test]
fn unskewed_field_is_exactly_poisson_at_each_site() {
    // With σ₁ = 0 the transform is Φ(z/σ₂) of a N(0, σ₂²) value, so every
    // site is Poisson(λ₀). Pool many small fields to approach independence.
    let mut all = Vec::new();
    for seed in 0..400 {
        let cfg = SkewFieldConfig {
            sigma1: 0.0,
            sigma2: 2.0,
            n_sites: 250,
            seed,
            ..Default::default()
        };
        all.extend(skew_field_dataset(&cfg).unwrap().counts);
    }
    let g = CountDist::poisson(5.0).unwrap();
    let tv = tv_against(&all, |y| g.pmf(y));
    assert!(tv < 0.02, "{tv}");
}

#[test]
fn skewed_field_keeps_the_poisson_marginal() {
    let mut all = Vec::new();
    for seed in 0..400 {
        let cfg = SkewFieldConfig {
            sigma1: 10.0,
            sigma2: 1.0,
            n_sites: 250,
            seed,
            ..Default::default()
        };
        all.extend(skew_field_dataset(&cfg).unwrap().counts);
    }
    let g = CountDist::poisson(5.0).unwrap();
    let tv = tv_against(&all, |y| g.pmf(y));
    assert!(tv < 0.02, "{tv}");
}

#[test]
fn generators_are_deterministic() {
    let cfg = SkewFieldConfig {
        n_sites: 300,
        seed: 8,
        ..Default::default()
    };
    assert_eq!(skew_field_dataset(&cfg).unwrap(), skew_field_dataset(&cfg).unwrap());
    let sites = grid_sites(300, GRID_RESOLUTION, 8).unwrap();
    assert_eq!(
        skew_field_counts(&cfg, &sites).unwrap(),
        skew_field_counts(&cfg, &sites).unwrap()
    );
    let s = SglmmConfig {
        n_sites: 300,
        seed: 8,
        ..Default::default()
    };
    assert_eq!(sglmm_dataset(&s).unwrap(), sglmm_dataset(&s).unwrap());
    assert_ne!(
        sglmm_dataset(&s).unwrap(),
        sglmm_dataset(&SglmmConfig { seed: 9, ..s }).unwrap()
    );
}

#[test]
fn sglmm_field_has_an_increasing_trend() {
    let d = sglmm_dataset(&SglmmConfig::default()).unwrap();
    let mean_where = |f: &dyn Fn(&Location) -> bool| {
        let v: Vec<f64> = d
            .locations
            .iter()
            .zip(&d.counts)
            .filter(|(l, _)| f(l))
            .map(|(_, &c)| c as f64)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean_where(&|l| l.x > 0.5) > mean_where(&|l| l.x <= 0.5));
    assert!(mean_where(&|l| l.y > 0.5) > mean_where(&|l| l.y <= 0.5));
}

#[test]
fn sglmm_counts_have_the_poisson_mean_when_the_field_is_flat() {
    let site = [Location::new(0.3, 0.6)];
    let cfg = SglmmConfig {
        gp_sigma2: 0.0,
        ..Default::default()
    };
    let n = 100_000;
    let draws: Vec<f64> = (0..n)
        .map(|s| sglmm_counts(&SglmmConfig { seed: s, ..cfg }, &site).unwrap()[0] as f64)
        .collect();
    let mu = (1.5f64 + 0.3 + 2.0 * 0.6).exp();
    let mean = draws.iter().sum::<f64>() / n as f64;
    assert!((mean - mu).abs() < 3.0 * (mu / n as f64).sqrt(), "{mean} vs {mu}");
}

fn params(family: CopulaFamily, lambda: f64, phi: f64) -> NnmpParams {
    NnmpParams {
        marginal: MarginalParams::poisson(lambda).unwrap(),
        copula: CopulaSpec::new(family, phi).unwrap(),
        weights: WeightParams::new([-0.3, 0.8, -0.5], 0.9, 0.25).unwrap(),
    }
}

#[test]
fn independence_forward_draws_are_iid_marginal() {
    let sites: Vec<Location> = (0..6).map(|k| Location::new(0.1 * k as f64, 0.05 * k as f64)).collect();
    let r = OrderedReferenceSet::in_given_order(&sites, 3).unwrap();
    let p = params(CopulaFamily::Clayton, 3.0, 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 50_000;
    let draws: Vec<Vec<u64>> = (0..n)
        .map(|_| {
            nnmp_forward_sample(&r, &Covariates::intercept_only(6), &p, ForwardMode::Discrete, &mut rng)
                .unwrap()
                .counts
        })
        .collect();
    let g = CountDist::poisson(3.0).unwrap();
    for i in 0..6 {
        let col: Vec<u64> = draws.iter().map(|d| d[i]).collect();
        assert!(tv_against(&col, |y| g.pmf(y)) < 0.01);
    }
    // Neighboring sites are uncorrelated.
    let corr = {
        let a: Vec<f64> = draws.iter().map(|d| d[4] as f64).collect();
        let b: Vec<f64> = draws.iter().map(|d| d[5] as f64).collect();
        let (ma, mb) = (a.iter().sum::<f64>() / n as f64, b.iter().sum::<f64>() / n as f64);
        let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n as f64;
        cov / 3.0
    };
    assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "{corr}");
}

#[test]
fn three_site_forward_draws_match_the_joint_pmf() {
    let sites = [
        Location::new(0.1, 0.1),
        Location::new(0.3, 0.2),
        Location::new(0.2, 0.35),
    ];
    let r = OrderedReferenceSet::in_given_order(&sites, 2).unwrap();
    let cov = Covariates::intercept_only(3);
    for family in CopulaFamily::ALL {
        let p = params(family, 2.0, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = 16usize;
        let mut h = vec![0usize; k * k * k];
        let n = 1_000_000;
        let mut overflow = 0usize;
        for _ in 0..n {
            let y = nnmp_forward_sample(&r, &cov, &p, ForwardMode::Discrete, &mut rng)
                .unwrap()
                .counts;
            if y.iter().all(|&v| (v as usize) < k) {
                h[(y[0] as usize * k + y[1] as usize) * k + y[2] as usize] += 1;
            } else {
                overflow += 1;
            }
        }
        let mut tv = 0.0;
        let mut mass = 0.0;
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    let pr = sequential_joint_pmf(&[a as u64, b as u64, c as u64], &r, &cov, &p).unwrap();
                    mass += pr;
                    tv += (h[(a * k + b) * k + c] as f64 / n as f64 - pr).abs();
                }
            }
        }
        tv += (overflow as f64 / n as f64 - (1.0 - mass)).abs();
        assert!(0.5 * tv < 0.01, "{family}: {}", 0.5 * tv);
    }
}

#[test]
fn joint_pmf_sums_to_one() {
    let sites = [
        Location::new(0.1, 0.1),
        Location::new(0.3, 0.2),
        Location::new(0.2, 0.35),
    ];
    let r = OrderedReferenceSet::in_given_order(&sites, 2).unwrap();
    let cov = Covariates::intercept_only(3);
    for family in CopulaFamily::ALL {
        let p = params(family, 1.5, 0.3);
        let mut total = 0.0;
        for a in 0..25u64 {
            for b in 0..25u64 {
                for c in 0..25u64 {
                    total += sequential_joint_pmf(&[a, b, c], &r, &cov, &p).unwrap();
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-9, "{family}: {total}");
    }
}

#[test]
fn continued_forward_draws_keep_the_marginal() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let sites: Vec<Location> = (0..10).map(|_| Location::new(rng.random(), rng.random())).collect();
    let r = OrderedReferenceSet::random_ordering(&sites, 3, 12).unwrap();
    let g = CountDist::poisson(4.0).unwrap();
    for family in CopulaFamily::ALL {
        let p = params(family, 4.0, 0.4);
        let n = 100_000;
        let mut cols: Vec<Vec<u64>> = (0..10).map(|_| Vec::with_capacity(n)).collect();
        for _ in 0..n {
            let d = nnmp_forward_sample(
                &r,
                &Covariates::intercept_only(10),
                &p,
                ForwardMode::Continued,
                &mut rng,
            )
            .unwrap();
            assert!(d.o.iter().all(|&o| o > 0.0 && o < 1.0));
            for (i, y) in d.counts.into_iter().enumerate() {
                cols[i].push(y);
            }
        }
        for c in &cols {
            assert!(tv_against(c, |y| g.pmf(y)) < 0.01, "{family}");
        }
    }
}
