//! Fit a Poisson copula NNMP (L = 10) to 800 sites of the skew-Gaussian
//! field and report the posterior of λ plus scores on the other 200.
//!
//! cargo run --release --example skew_field_fit -- [sigma1] [seed] [n_iter] [copula]

use std::time::Instant;

use discrete_nnmp::copula::CopulaFamily;
use discrete_nnmp::data::ReferenceData;
use discrete_nnmp::diagnose::{draws_by_row, scores};
use discrete_nnmp::marginal::MarginalFamily;
use discrete_nnmp::mcmc::{run_chain, McmcConfig, ModelSpec, Priors};
use discrete_nnmp::predict::{predictive_draws, predictive_summary, PredictionTarget};
use discrete_nnmp::simulate::{skew_field_dataset, SkewFieldConfig};
use discrete_nnmp::stats::quantile_sorted;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let sigma1: f64 = args.get(1).map_or(Ok(3.0), |s| s.parse())?;
    let seed: u64 = args.get(2).map_or(Ok(1), |s| s.parse())?;
    let n_iter: usize = args.get(3).map_or(Ok(20_000), |s| s.parse())?;
    let copula: CopulaFamily = args.get(4).map_or(Ok(CopulaFamily::Gumbel), |s| s.parse())?;

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
    let config = McmcConfig {
        n_iter,
        burnin: n_iter / 5,
        thin: 4,
        seed,
        ..Default::default()
    };
    let start = Instant::now();
    let fit = run_chain(&data, &spec, &Priors::default(), &config)?;
    let secs = start.elapsed().as_secs_f64();
    let mut lambda = fit.lambda_draws();
    lambda.sort_by(f64::total_cmp);
    let mean = lambda.iter().sum::<f64>() / lambda.len() as f64;
    println!(
        "lambda: mean {mean:.3}, 95% CI ({:.3}, {:.3}); {n_iter} sweeps in {secs:.1} s",
        quantile_sorted(&lambda, 0.025),
        quantile_sorted(&lambda, 0.975)
    );
    println!("acceptance: {:?}", fit.acceptance);

    let targets: Vec<PredictionTarget> = test
        .locations
        .iter()
        .map(|&l| PredictionTarget::new(l, vec![1.0]))
        .collect();
    let draws = predictive_draws(&targets, &fit.samples, &data, &spec, 1, seed)?;
    let y: Vec<f64> = test.counts.iter().map(|&c| c as f64).collect();
    let report = scores(&y, &draws_by_row(&draws)?)?;
    println!(
        "holdout scores ({copula}): CRPS {:.4}, ES {:.3}, VS {:.1}, RMSPE {:.3}, cover {:.3}, width {:.2}",
        report.crps, report.es, report.vs, report.rmspe, report.ci95_cover, report.ci95_width
    );
    let s = predictive_summary(&draws[0])?;
    println!("first holdout site: observed {}, predictive {s:?}", test.counts[0]);
    Ok(())
}
