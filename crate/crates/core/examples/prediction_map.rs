//! Fit a Gumbel-copula Poisson NNMP to a small skew field, then predict on a
//! regular grid and print a plot-ready table of predictive medians and
//! interval widths.
//!
//! cargo run --release --example prediction_map -- [grid_side] [n_iter] > map.tsv

use discrete_nnmp::copula::CopulaFamily;
use discrete_nnmp::data::ReferenceData;
use discrete_nnmp::geom::Location;
use discrete_nnmp::marginal::MarginalFamily;
use discrete_nnmp::mcmc::{run_chain, McmcConfig, ModelSpec, Priors};
use discrete_nnmp::predict::{predictive_draws, predictive_summary, PredictionTarget};
use discrete_nnmp::simulate::{skew_field_dataset, SkewFieldConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let side: usize = args.next().map_or(Ok(25), |s| s.parse())?;
    let n_iter: usize = args.next().map_or(Ok(5_000), |s| s.parse())?;
    let field = skew_field_dataset(&SkewFieldConfig {
        n_sites: 300,
        ..Default::default()
    })?;
    let data = ReferenceData::random_ordering(&field, 10, 1)?;
    let spec = ModelSpec {
        marginal: MarginalFamily::Poisson,
        copula: CopulaFamily::Gumbel,
        max_neighbors: 10,
    };
    let config = McmcConfig {
        n_iter,
        burnin: n_iter / 5,
        thin: 4,
        ..Default::default()
    };
    let fit = run_chain(&data, &spec, &Priors::default(), &config)?;
    let targets: Vec<PredictionTarget> = (0..side * side)
        .map(|k| {
            let (i, j) = (k % side, k / side);
            let loc = Location::new((i as f64 + 0.5) / side as f64, (j as f64 + 0.5) / side as f64);
            PredictionTarget::new(loc, vec![1.0])
        })
        .collect();
    let draws = predictive_draws(&targets, &fit.samples, &data, &spec, 1, 7)?;
    println!("x\ty\tmedian\tmean\twidth95");
    for (t, d) in targets.iter().zip(&draws) {
        let s = predictive_summary(d)?;
        println!(
            "{:.4}\t{:.4}\t{}\t{:.3}\t{}",
            t.location.x,
            t.location.y,
            s.median,
            s.mean,
            s.width()
        );
    }
    Ok(())
}
