//! Draw repeatedly from a discrete copula NNMP along a fixed ordering and
//! check two things per copula family: every site keeps its Poisson marginal,
//! and nearby sites are positively dependent.
//!
//! cargo run --release --example forward_sampling -- [replicates]

use discrete_nnmp::copula::{CopulaFamily, CopulaSpec};
use discrete_nnmp::geom::{Location, OrderedReferenceSet};
use discrete_nnmp::marginal::{CountDist, Covariates, MarginalParams};
use discrete_nnmp::simulate::{nnmp_forward_sample, ForwardMode, NnmpParams};
use discrete_nnmp::weights::WeightParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reps: usize = std::env::args().nth(1).map_or(Ok(20_000), |s| s.parse())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sites: Vec<Location> = (0..12).map(|_| Location::new(rng.random(), rng.random())).collect();
    let reference = OrderedReferenceSet::random_ordering(&sites, 3, 1)?;
    let g = CountDist::poisson(4.0)?;
    for family in CopulaFamily::ALL {
        let params = NnmpParams {
            marginal: MarginalParams::poisson(4.0)?,
            copula: CopulaSpec::new(family, 0.3)?,
            weights: WeightParams::new([-1.0, 0.0, 0.0], 1.0, 0.3)?,
        };
        let draws: Vec<Vec<u64>> = (0..reps)
            .map(|_| {
                nnmp_forward_sample(
                    &reference,
                    &Covariates::intercept_only(12),
                    &params,
                    ForwardMode::Discrete,
                    &mut rng,
                )
                .map(|d| d.counts)
            })
            .collect::<Result<_, _>>()?;
        let mut worst_tv: f64 = 0.0;
        for i in 0..12 {
            let mut tv = 0.0;
            let mut mass = 0.0;
            for y in 0..40u64 {
                let f = draws.iter().filter(|d| d[i] == y).count() as f64 / reps as f64;
                tv += (f - g.pmf(y)).abs();
                mass += g.pmf(y);
            }
            worst_tv = worst_tv.max(0.5 * (tv + 1.0 - mass));
        }
        // Correlation between the last site and its nearest neighbor.
        let i = 11;
        let j = reference.neighbors(i)[0];
        let (a, b): (Vec<f64>, Vec<f64>) = draws.iter().map(|d| (d[i] as f64, d[j] as f64)).unzip();
        let (ma, mb) = (a.iter().sum::<f64>() / reps as f64, b.iter().sum::<f64>() / reps as f64);
        let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / reps as f64;
        let d = reference.site(i).distance(&reference.site(j));
        println!(
            "{family:8} worst site-wise TV {worst_tv:.4}; corr(site {i}, neighbor {j} at distance {d:.3}) = {:.3}",
            cov / 4.0
        );
    }
    Ok(())
}
