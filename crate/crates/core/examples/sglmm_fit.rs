//! Fit a negative binomial NNMP with a Gaussian copula to a Poisson SGLMM
//! field with a linear trend, and compare the regression coefficients to the
//! generating values (1.5, 1, 2).
//!
//! cargo run --release --example sglmm_fit -- [seed] [n_iter]

use std::time::Instant;

use discrete_nnmp::copula::CopulaFamily;
use discrete_nnmp::data::ReferenceData;
use discrete_nnmp::marginal::MarginalFamily;
use discrete_nnmp::mcmc::{run_chain, McmcConfig, ModelSpec, Priors};
use discrete_nnmp::simulate::{sglmm_dataset, SglmmConfig};
use discrete_nnmp::stats::quantile_sorted;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).map_or(Ok(1), |s| s.parse())?;
    let n_iter: usize = args.get(2).map_or(Ok(20_000), |s| s.parse())?;

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
    let config = McmcConfig {
        n_iter,
        burnin: n_iter / 5,
        thin: 4,
        seed,
        ..Default::default()
    };
    let start = Instant::now();
    let fit = run_chain(&data, &spec, &Priors::default(), &config)?;
    println!("{n_iter} sweeps in {:.1} s", start.elapsed().as_secs_f64());
    for (k, truth) in cfg.beta.iter().enumerate() {
        let mut b = fit.beta_draws(k);
        b.sort_by(f64::total_cmp);
        let mean = b.iter().sum::<f64>() / b.len() as f64;
        println!(
            "beta{k}: mean {mean:.3}, 95% CI ({:.3}, {:.3}), truth {truth}",
            quantile_sorted(&b, 0.025),
            quantile_sorted(&b, 0.975)
        );
    }
    let r = fit.draws(|s| s.r().unwrap_or(f64::NAN));
    println!("r: mean {:.3}", r.iter().sum::<f64>() / r.len() as f64);
    println!("acceptance: {:?}", fit.acceptance);
    Ok(())
}
