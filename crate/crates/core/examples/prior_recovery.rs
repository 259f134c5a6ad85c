//! Run the sampler with the data terms switched off and compare each
//! parameter's draws with its prior through the Kolmogorov-Smirnov distance.
//!
//! cargo run --release --example prior_recovery -- [draws]

use discrete_nnmp::copula::CopulaFamily;
use discrete_nnmp::data::{CountData, ReferenceData};
use discrete_nnmp::geom::Location;
use discrete_nnmp::marginal::MarginalFamily;
use discrete_nnmp::mcmc::{run_chain, McmcConfig, ModelSpec, Priors};
use discrete_nnmp::stats::norm_cdf;

fn ks(mut x: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(k, &v)| (cdf(v) - k as f64 / n).abs().max((k as f64 + 1.0) / n - cdf(v)))
        .fold(0.0, f64::max)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let draws: usize = std::env::args().nth(1).map_or(Ok(10_000), |s| s.parse())?;
    let locations = [(0.1, 0.2), (0.4, 0.25), (0.3, 0.6), (0.8, 0.5), (0.65, 0.9)]
        .iter()
        .map(|&(x, y)| Location::new(x, y))
        .collect();
    let data = ReferenceData::in_given_order(&CountData::intercept_only(locations, vec![2, 4, 1, 0, 3])?, 2)?;
    let spec = ModelSpec {
        marginal: MarginalFamily::Poisson,
        copula: CopulaFamily::Gumbel,
        max_neighbors: 2,
    };
    let priors = Priors::default();
    let config = McmcConfig {
        n_iter: 5_000 + 50 * draws,
        burnin: 5_000,
        thin: 50,
        prior_only: true,
        ..Default::default()
    };
    let fit = run_chain(&data, &spec, &priors, &config)?;
    println!(
        "{} draws; KS distance to the prior (the median for independent draws is about {:.3})",
        fit.samples.len(),
        0.87 / (fit.samples.len() as f64).sqrt()
    );
    println!("lambda  {:.4}", ks(fit.lambda_draws(), |x| priors.lambda.cdf(x)));
    println!("phi     {:.4}", ks(fit.draws(|s| s.phi), |x| priors.phi.cdf(x)));
    println!("zeta    {:.4}", ks(fit.draws(|s| s.zeta), |x| priors.zeta.cdf(x)));
    println!("kappa2  {:.4}", ks(fit.draws(|s| s.kappa2), |x| priors.kappa2.cdf(x)));
    for k in 0..3 {
        let (m, s) = (priors.gamma.mean[k], priors.gamma.cov[k][k].sqrt());
        println!(
            "gamma{k}  {:.4}",
            ks(fit.draws(|st| st.gamma[k]), |x| norm_cdf((x - m) / s))
        );
    }
    Ok(())
}
