//! Posterior predictive draws of counts at reference and new locations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::copula::CopulaSpec;
use crate::data::ReferenceData;
use crate::error::{Error, Result};
use crate::geom::Location;
use crate::marginal::{ContinuedValue, CountDist};
use crate::mcmc::{ModelSpec, ModelState};
use crate::stats::open01;
use crate::weights::{cutoffs_from_distances, weights_from_mean};

/// A location to predict at, with its covariate row (intercept included).
/// Poisson models ignore the covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTarget {
    pub location: Location,
    pub covariates: Vec<f64>,
}

impl PredictionTarget {
    pub fn new(location: Location, covariates: Vec<f64>) -> Self {
        PredictionTarget { location, covariates }
    }

    /// Target at a reference site, reusing its stored covariates.
    pub fn at_reference(data: &ReferenceData, i: usize) -> Self {
        PredictionTarget {
            location: data.reference.site(i),
            covariates: data.covariates.row(i).to_vec(),
        }
    }
}

/// Neighbors, distances and mixture weights of a target under one sample.
struct Mixture {
    neighbors: Vec<usize>,
    distances: Vec<f64>,
    weights: Vec<f64>,
}

fn mixture_for(target: &Location, sample: &ModelState, data: &ReferenceData, l: usize) -> Result<Option<Mixture>> {
    let neighbors = match data.reference.position_of(target) {
        Some(0) => return Ok(None),
        Some(k) => data.reference.neighbors(k).to_vec(),
        None => data.reference.neighbors_of_new(target, l)?,
    };
    let distances: Vec<f64> = neighbors
        .iter()
        .map(|&j| target.distance(&data.reference.site(j)))
        .collect();
    let weights = if neighbors.len() == 1 {
        vec![1.0]
    } else {
        let c = cutoffs_from_distances(&distances, sample.zeta)?;
        let g = sample.gamma;
        let mu = g[0] + g[1] * target.x + g[2] * target.y;
        weights_from_mean(&c, mu, sample.kappa2.sqrt())
    };
    Ok(Some(Mixture {
        neighbors,
        distances,
        weights,
    }))
}

fn target_dist(target: &PredictionTarget, sample: &ModelState, data: &ReferenceData) -> Result<CountDist> {
    let p = data.covariates.ncol();
    match sample.marginal {
        crate::marginal::MarginalParams::Poisson { .. } => sample.marginal.dist(&[]),
        _ => {
            if target.covariates.len() != p {
                return Err(Error::invalid(format!(
                    "target has {} covariates, the model expects {p}",
                    target.covariates.len()
                )));
            }
            sample.marginal.dist(&target.covariates)
        }
    }
}

/// One predictive count at `target` under one posterior sample.
///
/// A reference site is predicted from its own neighbor set with weights
/// rebuilt from the sample; the first reference site and its marginal are
/// used as is. A new site takes its `L` nearest reference sites and fresh
/// cutoffs. A component is drawn from the weights, the neighbor's continued
/// value (with the sample's jitter) fixes `t2`, and the conditional copula
/// is inverted at a uniform draw.
pub fn predict_at<R: Rng + ?Sized>(
    target: &PredictionTarget,
    sample: &ModelState,
    data: &ReferenceData,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<u64> {
    let dist = target_dist(target, sample, data)?;
    let Some(mix) = mixture_for(&target.location, sample, data, spec.max_neighbors)? else {
        return Ok(ContinuedValue::count_of(dist.continued_inverse(open01(rng))?));
    };
    let u: f64 = open01(rng);
    let mut l = mix.weights.len() - 1;
    let mut acc = 0.0;
    for (k, w) in mix.weights.iter().enumerate() {
        acc += w;
        if u < acc {
            l = k;
            break;
        }
    }
    let j = mix.neighbors[l];
    let dj = sample.marginal.dist(data.covariates.row(j))?;
    let t2 = dj
        .continued_cdf_at(ContinuedValue::new(data.counts[j], sample.o[j])?)
        .clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    let param = CopulaSpec::new(spec.copula, sample.phi)?.link(mix.distances[l])?;
    let t1 = param
        .conditional_sample(t2, open01(rng))?
        .clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    Ok(ContinuedValue::count_of(dist.continued_inverse(t1)?))
}

/// Seed of the stream for (seed, target, sample); splitmix64 finalizer.
pub fn stream_seed(seed: u64, target: usize, sample: usize) -> u64 {
    let mut z = seed
        ^ (target as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (sample as u64).wrapping_mul(0xD1B5_4A32_D192_ED03).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pooled predictive draws: `draws_per_sample` per posterior sample for
/// each target, as `out[target][k]`. Targets are split across threads; each
/// (target, sample) pair has its own stream, so results do not depend on
/// the thread count.
pub fn predictive_draws(
    targets: &[PredictionTarget],
    samples: &[ModelState],
    data: &ReferenceData,
    spec: &ModelSpec,
    draws_per_sample: usize,
    seed: u64,
) -> Result<Vec<Vec<u64>>> {
    if samples.is_empty() {
        return Err(Error::invalid("no posterior samples to predict from"));
    }
    if draws_per_sample == 0 {
        return Err(Error::invalid("at least one draw per sample is required"));
    }
    let one = |t: usize| -> Result<Vec<u64>> {
        let mut out = Vec::with_capacity(samples.len() * draws_per_sample);
        for (s, sample) in samples.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, t, s));
            for _ in 0..draws_per_sample {
                out.push(predict_at(&targets[t], sample, data, spec, &mut rng)?);
            }
        }
        Ok(out)
    };
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(targets.len().max(1));
    if workers <= 1 {
        return (0..targets.len()).map(one).collect();
    }
    let chunk = targets.len().div_ceil(workers);
    let parts: Vec<Result<Vec<Vec<u64>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let one = &one;
                scope.spawn(move || {
                    let lo = w * chunk;
                    let hi = ((w + 1) * chunk).min(targets.len());
                    (lo..hi).map(one).collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::numerical("a prediction worker panicked")))
            })
            .collect()
    });
    let mut out = Vec::with_capacity(targets.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Pointwise summary of pooled predictive draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary {
    pub median: f64,
    pub mean: f64,
    pub lower95: f64,
    pub upper95: f64,
    pub n_draws: usize,
}

impl PredictiveSummary {
    pub fn width(&self) -> f64 {
        self.upper95 - self.lower95
    }
}

/// Inverse of the empirical cdf: the smallest draw `x` with `F_n(x) ≥ p`,
/// so the quantile is always one of the counts.
fn count_quantile(sorted: &[u64], p: f64) -> f64 {
    let n = sorted.len();
    let k = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1] as f64
}

/// Median, mean and central 95% interval of pooled draws. Quantiles are
/// counts (inverse empirical cdf), not interpolated.
pub fn predictive_summary(draws: &[u64]) -> Result<PredictiveSummary> {
    if draws.is_empty() {
        return Err(Error::invalid("no predictive draws to summarize"));
    }
    let mut x = draws.to_vec();
    x.sort_unstable();
    Ok(PredictiveSummary {
        median: count_quantile(&x, 0.5),
        mean: x.iter().map(|&v| v as f64).sum::<f64>() / x.len() as f64,
        lower95: count_quantile(&x, 0.025),
        upper95: count_quantile(&x, 0.975),
        n_draws: x.len(),
    })
}
