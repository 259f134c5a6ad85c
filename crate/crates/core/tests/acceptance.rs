//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs with a plain `main` so the lines are printed even when cargo captures
//! test output. Pass criterion ids (`A3 A7`) to run a subset.
//!
//! The model fits here run the full chains and take several minutes in total.

use std::process::ExitCode;
use std::time::Instant;

use discrete_nnmp::copula::{discrete_pmf, CopulaFamily, CopulaParam, CopulaSpec};
use discrete_nnmp::data::{CountData, ReferenceData};
use discrete_nnmp::diagnose::{anderson_darling, holdout_scores, residual_set, ScoreReport};
use discrete_nnmp::geom::{Location, OrderedReferenceSet};
use discrete_nnmp::marginal::{CountDist, Covariates, MarginalFamily, MarginalParams};
use discrete_nnmp::mcmc::{
    initial_state, log_likelihood, run_chain, run_chain_from, McmcConfig, ModelSpec, PosteriorSamples, Priors,
    UpdateMask,
};
use discrete_nnmp::simulate::{
    forward_with, grid_sites, nnmp_forward_sample, sequential_joint_pmf, sglmm_dataset, skew_field_dataset,
    ForwardMode, NnmpParams, SglmmConfig, SkewFieldConfig, GRID_RESOLUTION,
};
use discrete_nnmp::stats::{norm_cdf, quantile_sorted};
use discrete_nnmp::weights::WeightParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<(bool, String), Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    let checks: [(&str, &str, Check); 8] = [
        ("A1", "sequential joint pmf equals the expanded configuration sum", a1),
        ("A2", "lambda recovery on the skew field (sigma1 = 3)", a2),
        (
            "A3",
            "Gumbel scores better than Clayton on the skew field (sigma1 = 10)",
            a3,
        ),
        ("A4", "beta recovery on the SGLMM field", a4),
        ("A5", "copula numerics", a5),
        ("A6", "sampler calibration", a6),
        ("A7", "residual normality on refitted replicates", a7),
        ("A8", "forward draws keep the marginal", a8),
    ];
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, what, check) in checks {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += !pass as usize;
        println!(
            "{id} {} ({:.1} s) {what}: {detail}",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Posterior mean and central 95% interval.
fn summarize(mut x: Vec<f64>) -> (f64, f64, f64) {
    x.sort_by(f64::total_cmp);
    (mean(&x), quantile_sorted(&x, 0.025), quantile_sorted(&x, 0.975))
}

fn chain_config(n_iter: usize, seed: u64) -> McmcConfig {
    McmcConfig {
        n_iter,
        burnin: n_iter / 5,
        thin: 4,
        seed,
        ..Default::default()
    }
}

// ---------------------------------------------------------------- A1

/// Joint pmf as `Π g_i · Σ_configurations Π w c`, enumerating every
/// configuration, with `c` the copula rectangle over both probability steps
/// divided by both marginal pmfs.
fn expanded_joint_pmf(counts: &[u64], reference: &OrderedReferenceSet, params: &NnmpParams) -> f64 {
    let n = reference.len();
    let g = params.marginal.dist(&[]).unwrap();
    let cf = |k: i64| g.cdf(k);
    let pmf = |y: u64| g.pmf(y);
    let c = |i: usize, j: usize| -> f64 {
        let d = reference.site(i).distance(&reference.site(j));
        let param = params.copula.link(d).unwrap();
        let (yi, yj) = (counts[i] as i64, counts[j] as i64);
        let rect = param.cdf(cf(yi), cf(yj)).unwrap()
            - param.cdf(cf(yi - 1), cf(yj)).unwrap()
            - param.cdf(cf(yi), cf(yj - 1)).unwrap()
            + param.cdf(cf(yi - 1), cf(yj - 1)).unwrap();
        rect / (pmf(counts[i]) * pmf(counts[j]))
    };
    let w: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            if i == 0 {
                Vec::new()
            } else {
                params.site_weights(reference, i).unwrap()
            }
        })
        .collect();
    let sizes: Vec<usize> = (1..n).map(|i| reference.neighbors(i).len()).collect();
    let mut idx = vec![0usize; n - 1];
    let mut total = 0.0;
    loop {
        let mut term = 1.0;
        for i in 1..n {
            let l = idx[i - 1];
            term *= w[i][l] * c(i, reference.neighbors(i)[l]);
        }
        total += term;
        let mut k = 0;
        loop {
            if k == idx.len() {
                let prod_g: f64 = counts.iter().map(|&y| pmf(y)).product();
                return prod_g * total;
            }
            idx[k] += 1;
            if idx[k] < sizes[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn a1() -> Result<(bool, String), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    let mut evaluations = 0;
    for family in CopulaFamily::ALL {
        for _ in 0..50 {
            let n = rng.random_range(3..=5);
            let l = rng.random_range(1..=3);
            let sites: Vec<Location> = (0..n).map(|_| Location::new(rng.random(), rng.random())).collect();
            let reference = OrderedReferenceSet::in_given_order(&sites, l)?;
            let params = NnmpParams {
                marginal: MarginalParams::poisson(rng.random_range(0.5..8.0))?,
                copula: CopulaSpec::new(family, rng.random_range(0.05..1.5))?,
                weights: WeightParams::new(
                    [
                        rng.random_range(-2.0..1.0),
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                    ],
                    rng.random_range(0.2..2.0),
                    rng.random_range(0.05..0.8),
                )?,
            };
            let cov = Covariates::intercept_only(n);
            for _ in 0..10 {
                let counts: Vec<u64> = (0..n).map(|_| rng.random_range(0..=15)).collect();
                let seq = sequential_joint_pmf(&counts, &reference, &cov, &params)?;
                let exp = expanded_joint_pmf(&counts, &reference, &params);
                worst = worst.max((seq - exp).abs());
                // Far in the tail the plain rectangle formula cancels to 0.
                if exp > 1e-12 {
                    worst_rel = worst_rel.max((seq - exp).abs() / exp);
                }
                evaluations += 1;
            }
        }
    }
    Ok((
        worst < 1e-10,
        format!(
            "{evaluations} evaluations, max abs difference {worst:.2e} (tolerance 1e-10), \
             max relative difference {worst_rel:.2e} where the pmf exceeds 1e-12"
        ),
    ))
}

// ---------------------------------------------------------------- A2, A3

struct SkewFit {
    lambda: (f64, f64, f64),
    scores: ScoreReport,
}

fn fit_skew_field(sigma1: f64, seed: u64, copula: CopulaFamily) -> Result<SkewFit, Box<dyn std::error::Error>> {
    let full = skew_field_dataset(&SkewFieldConfig {
        sigma1,
        seed,
        ..Default::default()
    })?;
    let train = full.subset(&(0..800).collect::<Vec<_>>())?;
    let test = full.subset(&(800..1000).collect::<Vec<_>>())?;
    let data = ReferenceData::random_ordering(&train, 10, seed)?;
    let spec = ModelSpec {
        marginal: MarginalFamily::Poisson,
        copula,
        max_neighbors: 10,
    };
    let fit = run_chain(&data, &spec, &Priors::default(), &chain_config(20_000, seed))?;
    let scores = holdout_scores(&test, &fit.samples, &data, &spec, 1, seed)?;
    Ok(SkewFit {
        lambda: summarize(fit.lambda_draws()),
        scores,
    })
}

fn a2() -> Result<(bool, String), Box<dyn std::error::Error>> {
    let mut per_seed = Vec::new();
    let mut parts = Vec::new();
    for seed in 1..=3 {
        let (m, lo, hi) = fit_skew_field(3.0, seed, CopulaFamily::Gumbel)?.lambda;
        parts.push(format!("seed {seed}: {m:.3} ({lo:.3}, {hi:.3})"));
        per_seed.push((m, lo, hi));
    }
    let m = mean(&per_seed.iter().map(|s| s.0).collect::<Vec<_>>());
    let lo = mean(&per_seed.iter().map(|s| s.1).collect::<Vec<_>>());
    let hi = mean(&per_seed.iter().map(|s| s.2).collect::<Vec<_>>());
    let pass = (4.4..=5.4).contains(&m) && lo <= 5.0 && 5.0 <= hi;
    Ok((
        pass,
        format!(
            "averaged mean {m:.3} in [4.4, 5.4], averaged 95% CI ({lo:.3}, {hi:.3}) must contain 5; {}",
            parts.join("; ")
        ),
    ))
}

fn a3() -> Result<(bool, String), Box<dyn std::error::Error>> {
    let mut wins = 0;
    let mut parts = Vec::new();
    for seed in 1..=3 {
        let g = fit_skew_field(10.0, seed, CopulaFamily::Gumbel)?.scores;
        let c = fit_skew_field(10.0, seed, CopulaFamily::Clayton)?.scores;
        let ok = g.crps < c.crps && g.es < c.es;
        wins += ok as usize;
        parts.push(format!(
            "seed {seed}: CRPS {:.3} vs {:.3}, ES {:.2} vs {:.2}",
            g.crps, c.crps, g.es, c.es
        ));
    }
    Ok((
        wins >= 2,
        format!("{wins}/3 seeds ordered (need 2); {}", parts.join("; ")),
    ))
}

// ---------------------------------------------------------------- A4

fn a4() -> Result<(bool, String), Box<dyn std::error::Error>> {
    let mut good = 0;
    let mut parts = Vec::new();
    for seed in 1..=3 {
        let cfg = SglmmConfig {
            seed,
            ..Default::default()
        };
        let full = sglmm_dataset(&cfg)?;
        let train = full.subset(&(0..800).collect::<Vec<_>>())?;
        let data = ReferenceData::random_ordering(&train, 10, seed)?;
        let spec = ModelSpec {
            marginal: MarginalFamily::NegBinom,
            copula: CopulaFamily::Gaussian,
            max_neighbors: 10,
        };
        let fit = run_chain(&data, &spec, &Priors::default(), &chain_config(20_000, seed))?;
        let mut ok = true;
        let mut coefs = Vec::new();
        for (k, &truth) in cfg.beta.iter().enumerate() {
            let (m, lo, hi) = summarize(fit.beta_draws(k));
            ok &= (m - truth).abs() <= 0.5 && lo <= truth && truth <= hi;
            coefs.push(format!("{m:.2} ({lo:.2}, {hi:.2})"));
        }
        good += ok as usize;
        parts.push(format!("seed {seed}: {}", coefs.join(", ")));
    }
    Ok((
        good >= 2,
        format!("{good}/3 seeds recover (1.5, 1, 2) (need 2); {}", parts.join("; ")),
    ))
}

// ---------------------------------------------------------------- A5

fn parameter_grid(family: CopulaFamily) -> Vec<CopulaParam> {
    let values: &[f64] = match family {
        CopulaFamily::Gaussian => &[0.01, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.85, 0.92, 0.97],
        CopulaFamily::Gumbel => &[1.0, 1.2, 1.5, 2.0, 3.0, 5.0, 8.0, 15.0, 30.0, 50.0],
        CopulaFamily::Clayton => &[1e-6, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 60.0, 98.0],
    };
    values.iter().map(|&v| CopulaParam::new(family, v).unwrap()).collect()
}

fn a5() -> Result<(bool, String), Box<dyn std::error::Error>> {
    let grid: Vec<f64> = (0..20).map(|k| (k as f64 + 0.5) / 20.0).collect();
    let h = 1e-6;
    let (mut fd_err, mut trip_err, mut sum_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut skipped = 0;
    let g = CountDist::poisson(5.0)?;
    let cdf = |k: i64| g.cdf(k);
    for family in CopulaFamily::ALL {
        for param in parameter_grid(family) {
            for &t1 in &grid {
                for &t2 in &grid {
                    let fd = (param.cdf(t1, t2 + h)? - param.cdf(t1, t2 - h)?) / (2.0 * h);
                    let z = param.conditional_cdf(t1, t2)?;
                    fd_err = fd_err.max((fd - z).abs());
                    // Rounding z to a double already moves the preimage by
                    // about eps / c(t1, t2); such points cannot round-trip.
                    if f64::EPSILON / param.density(t1, t2)? > 1e-9 {
                        skipped += 1;
                        continue;
                    }
                    trip_err = trip_err.max((param.conditional_sample(t2, z)? - t1).abs());
                }
            }
            let mut total = 0.0;
            for u in 0..=40 {
                for v in 0..=40 {
                    total += discrete_pmf(&param, cdf, cdf, u, v)?;
                }
            }
            sum_err = sum_err.max((total - 1.0).abs());
        }
    }
    let pass = fd_err < 1e-5 && trip_err < 1e-8 && sum_err < 1e-8;
    Ok((
        pass,
        format!(
            "finite-difference error {fd_err:.1e} (< 1e-5), round-trip error {trip_err:.1e} (< 1e-8, \
             {skipped} ill-conditioned points skipped), pmf sum error {sum_err:.1e} (< 1e-8)"
        ),
    ))
}

// ---------------------------------------------------------------- A6

fn ks_distance(mut x: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(k, &v)| {
            let f = cdf(v);
            (f - k as f64 / n).abs().max((k as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

const LOCS5: [(f64, f64); 5] = [(0.1, 0.2), (0.4, 0.25), (0.3, 0.6), (0.8, 0.5), (0.65, 0.9)];

fn five_site_data(l: usize) -> Result<ReferenceData, Box<dyn std::error::Error>> {
    let locations = LOCS5.iter().map(|&(x, y)| Location::new(x, y)).collect();
    let d = CountData::intercept_only(locations, vec![2, 4, 1, 0, 3])?;
    Ok(ReferenceData::in_given_order(&d, l)?)
}

fn prior_recovery() -> Result<(f64, String), Box<dyn std::error::Error>> {
    let data = five_site_data(2)?;
    let spec = ModelSpec {
        marginal: MarginalFamily::Poisson,
        copula: CopulaFamily::Gumbel,
        max_neighbors: 2,
    };
    let priors = Priors::default();
    let config = McmcConfig {
        n_iter: 5_000 + 10_000 * 50,
        burnin: 5_000,
        thin: 50,
        seed: 606,
        prior_only: true,
        ..Default::default()
    };
    let fit: PosteriorSamples = run_chain(&data, &spec, &priors, &config)?;
    let gauss = |k: usize| {
        let (m, s) = (priors.gamma.mean[k], priors.gamma.cov[k][k].sqrt());
        move |x: f64| norm_cdf((x - m) / s)
    };
    let d = [
        ("lambda", ks_distance(fit.lambda_draws(), |x| priors.lambda.cdf(x))),
        ("phi", ks_distance(fit.draws(|s| s.phi), |x| priors.phi.cdf(x))),
        ("zeta", ks_distance(fit.draws(|s| s.zeta), |x| priors.zeta.cdf(x))),
        ("kappa2", ks_distance(fit.draws(|s| s.kappa2), |x| priors.kappa2.cdf(x))),
        ("gamma0", ks_distance(fit.draws(|s| s.gamma[0]), gauss(0))),
        ("gamma1", ks_distance(fit.draws(|s| s.gamma[1]), gauss(1))),
        ("gamma2", ks_distance(fit.draws(|s| s.gamma[2]), gauss(2))),
    ];
    let worst = d.iter().map(|x| x.1).fold(0.0, f64::max);
    let text = d
        .iter()
        .map(|(k, v)| format!("{k} {v:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((worst, format!("{} draws, KS {text}", fit.samples.len())))
}

fn lambda_grid_distance() -> Result<f64, Box<dyn std::error::Error>> {
    let data = five_site_data(2)?;
    let spec = ModelSpec {
        marginal: MarginalFamily::Poisson,
        copula: CopulaFamily::Gaussian,
        max_neighbors: 2,
    };
    let priors = Priors::default();
    let init = initial_state(&data, &spec, &priors)?;
    let config = McmcConfig {
        n_iter: 101_000,
        burnin: 1_000,
        thin: 10,
        seed: 77,
        updates: UpdateMask::only_marginal(),
        ..Default::default()
    };
    let fit = run_chain_from(&data, &spec, &priors, &config, init.clone())?;
    let mut draws = fit.lambda_draws();
    draws.sort_by(f64::total_cmp);
    let h = 1e-3;
    let grid: Vec<f64> = (1..=15_000).map(|k| k as f64 * h).collect();
    let mut lp = Vec::with_capacity(grid.len());
    for &l in &grid {
        let mut x = init.clone();
        x.marginal = MarginalParams::poisson(l)?;
        lp.push(log_likelihood(&x, &data, &spec)? + priors.lambda.ln_pdf_unnorm(l));
    }
    let m = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = lp.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = dens.iter().sum();
    let mut cdf = 0.0;
    let mut sup: f64 = 0.0;
    for (k, &l) in grid.iter().enumerate() {
        cdf += dens[k] / total;
        let emp = draws.partition_point(|&v| v <= l) as f64 / draws.len() as f64;
        sup = sup.max((cdf - emp).abs());
    }
    Ok(sup)
}

fn a6() -> Result<(bool, String), Box<dyn std::error::Error>> {
    let (ks, detail) = prior_recovery()?;
    let sup = lambda_grid_distance()?;
    Ok((
        ks < 0.02 && sup < 0.03,
        format!("prior recovery max KS {ks:.4} (< 0.02) [{detail}]; five-site lambda sup-cdf {sup:.4} (< 0.03)"),
    ))
}

// ---------------------------------------------------------------- A7

fn a7() -> Result<(bool, String), Box<dyn std::error::Error>> {
    let n = 800;
    let spec = ModelSpec {
        marginal: MarginalFamily::Poisson,
        copula: CopulaFamily::Gaussian,
        max_neighbors: 10,
    };
    let truth = NnmpParams {
        marginal: MarginalParams::poisson(5.0)?,
        copula: CopulaSpec::new(CopulaFamily::Gaussian, 0.5)?,
        weights: WeightParams::new([-1.5, 0.0, 0.0], 1.0, 0.5)?,
    };
    let mut passes = 0;
    let mut stats = Vec::new();
    for rep in 0..20u64 {
        let seed = 100 + rep;
        let sites = grid_sites(n, GRID_RESOLUTION, seed)?;
        let layout = ReferenceData::random_ordering(&CountData::intercept_only(sites.clone(), vec![0; n])?, 10, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = nnmp_forward_sample(
            &layout.reference,
            &Covariates::intercept_only(n),
            &truth,
            ForwardMode::Continued,
            &mut rng,
        )?;
        let data = CountData::intercept_only(sites, layout.to_input_order(&draw.counts))?;
        let data = ReferenceData::random_ordering(&data, 10, seed)?;
        let fit = run_chain(&data, &spec, &Priors::default(), &chain_config(4_000, seed))?;
        let ad = anderson_darling(&residual_set(&fit.samples, &data, &spec)?.posterior_mean())?;
        passes += ad.passes() as usize;
        stats.push(format!("{:.2}", ad.modified));
    }
    Ok((
        passes >= 16,
        format!(
            "{passes}/20 replicates below the 5% critical value 0.752 (need 16); statistics {}",
            stats.join(" ")
        ),
    ))
}

// ---------------------------------------------------------------- A8

fn a8() -> Result<(bool, String), Box<dyn std::error::Error>> {
    let n = 10;
    let reps = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let sites: Vec<Location> = (0..n).map(|_| Location::new(rng.random(), rng.random())).collect();
    let reference = OrderedReferenceSet::random_ordering(&sites, 3, 808)?;
    let g = CountDist::poisson(5.0)?;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for family in CopulaFamily::ALL {
        let params = NnmpParams {
            marginal: MarginalParams::poisson(5.0)?,
            copula: CopulaSpec::new(family, 0.4)?,
            weights: WeightParams::new([-0.5, 1.0, -1.0], 1.0, 0.3)?,
        };
        let dists = vec![g; n];
        let weights: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                if i == 0 {
                    Ok(Vec::new())
                } else {
                    params.site_weights(&reference, i)
                }
            })
            .collect::<Result<_, _>>()?;
        let mut hist = vec![vec![0usize; 64]; n];
        for _ in 0..reps {
            let draw = forward_with(
                &reference,
                &dists,
                &weights,
                &params.copula,
                ForwardMode::Discrete,
                &mut rng,
            )?;
            for (i, &y) in draw.counts.iter().enumerate() {
                hist[i][(y as usize).min(63)] += 1;
            }
        }
        let mut fam_worst: f64 = 0.0;
        for h in &hist {
            let mut tv = 0.0;
            let mut mass = 0.0;
            for (y, &c) in h.iter().enumerate().take(63) {
                let p = g.pmf(y as u64);
                mass += p;
                tv += (c as f64 / reps as f64 - p).abs();
            }
            tv += (h[63] as f64 / reps as f64 - (1.0 - mass)).abs();
            fam_worst = fam_worst.max(0.5 * tv);
        }
        worst = worst.max(fam_worst);
        parts.push(format!("{family} {fam_worst:.4}"));
    }
    Ok((
        worst < 0.01,
        format!("max site-wise TV over {reps} draws: {} (< 0.01)", parts.join(", ")),
    ))
}
