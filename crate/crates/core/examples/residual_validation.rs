//! Simulate replicate datasets from a Gaussian-copula Poisson NNMP, refit each
//! with the same specification, and check the posterior-mean randomized
//! quantile residuals for normality.
//!
//! cargo run --release --example residual_validation -- [replicates] [n_iter] [n_sites]

use discrete_nnmp::copula::{CopulaFamily, CopulaSpec};
use discrete_nnmp::data::{CountData, ReferenceData};
use discrete_nnmp::diagnose::{anderson_darling, residual_set};
use discrete_nnmp::marginal::{Covariates, MarginalFamily, MarginalParams};
use discrete_nnmp::mcmc::{run_chain, McmcConfig, ModelSpec, Priors};
use discrete_nnmp::simulate::{grid_sites, nnmp_forward_sample, ForwardMode, NnmpParams, GRID_RESOLUTION};
use discrete_nnmp::weights::WeightParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let replicates: u64 = args.get(1).map_or(Ok(5), |s| s.parse())?;
    let n_iter: usize = args.get(2).map_or(Ok(4000), |s| s.parse())?;
    let n: usize = args.get(3).map_or(Ok(800), |s| s.parse())?;

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
    for rep in 0..replicates {
        let seed = 100 + rep;
        let sites = grid_sites(n, GRID_RESOLUTION, seed)?;
        let empty = CountData::intercept_only(sites.clone(), vec![0; n])?;
        let layout = ReferenceData::random_ordering(&empty, spec.max_neighbors, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = nnmp_forward_sample(
            &layout.reference,
            &Covariates::intercept_only(n),
            &truth,
            ForwardMode::Continued,
            &mut rng,
        )?;
        let data = CountData::intercept_only(sites, layout.to_input_order(&draw.counts))?;
        let data = ReferenceData::random_ordering(&data, spec.max_neighbors, seed)?;
        let config = McmcConfig {
            n_iter,
            burnin: n_iter / 5,
            thin: 4,
            seed,
            ..Default::default()
        };
        let fit = run_chain(&data, &spec, &Priors::default(), &config)?;
        let residuals = residual_set(&fit.samples, &data, &spec)?;
        let ad = anderson_darling(&residuals.posterior_mean())?;
        passes += ad.passes() as usize;
        let lambda = fit.lambda_draws();
        println!(
            "replicate {rep}: lambda mean {:.3}, AD {:.3} (critical {}), {}",
            lambda.iter().sum::<f64>() / lambda.len() as f64,
            ad.modified,
            ad.critical_5pct,
            if ad.passes() { "pass" } else { "fail" }
        );
    }
    println!("{passes}/{replicates} replicates pass");
    Ok(())
}
