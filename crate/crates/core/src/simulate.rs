//! Synthetic data: skew-Gaussian copula Poisson fields, Poisson SGLMM fields,
//! and forward draws from a discrete copula NNMP itself.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::copula::{discrete_pmf, CopulaFamily, CopulaSpec};
use crate::data::CountData;
use crate::error::{Error, Result};
use crate::geom::{Location, OrderedReferenceSet};
use crate::marginal::{ContinuedValue, CountDist, Covariates, MarginalParams};
use crate::stats::{integrate_lower_tail, norm_cdf, norm_pdf, open01, sample_log_categorical};
use crate::weights::{cutoffs, mixture_weights, WeightParams};

/// Grid resolution used by the simulation studies.
pub const GRID_RESOLUTION: usize = 120;

/// `n` distinct cell centres `((a + 0.5)/res, (b + 0.5)/res)` of a `res × res`
/// grid on the unit square, drawn uniformly without replacement.
pub fn grid_sites(n: usize, resolution: usize, seed: u64) -> Result<Vec<Location>> {
    let cells = resolution * resolution;
    if n > cells {
        return Err(Error::invalid(format!("cannot draw {n} sites from {cells} grid cells")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / resolution as f64;
    Ok(sample(&mut rng, cells, n)
        .into_iter()
        .map(|k| Location::new(((k % resolution) as f64 + 0.5) * h, ((k / resolution) as f64 + 0.5) * h))
        .collect())
}

/// One zero-mean Gaussian vector with covariance `variance · exp(-d/range)`.
pub fn gp_sample(sites: &[Location], range: f64, variance: f64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gp_sample_with(sites, range, variance, &mut rng)
}

/// Lower Cholesky factor of the exponential covariance, with diagonal jitter
/// escalated from 1e-10 to 1e-6 (relative to the variance) if needed.
pub fn exponential_cov_factor(sites: &[Location], range: f64, variance: f64) -> Result<DMatrix<f64>> {
    if !(range > 0.0 && variance >= 0.0) {
        return Err(Error::invalid("GP range must be positive and variance nonnegative"));
    }
    let n = sites.len();
    let k = DMatrix::from_fn(n, n, |i, j| variance * (-sites[i].distance(&sites[j]) / range).exp());
    let mut jitter = 1e-10;
    loop {
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter * variance.max(f64::MIN_POSITIVE);
        }
        if let Some(ch) = kj.cholesky() {
            return Ok(ch.l());
        }
        jitter *= 10.0;
        if jitter > 1e-6 * 1.0001 {
            return Err(Error::numerical("GP covariance factorization failed at maximum jitter"));
        }
    }
}

pub fn gp_sample_with<R: Rng + ?Sized>(sites: &[Location], range: f64, variance: f64, rng: &mut R) -> Result<Vec<f64>> {
    if variance == 0.0 {
        return Ok(vec![0.0; sites.len()]);
    }
    let l = exponential_cov_factor(sites, range, variance)?;
    let z = DVector::from_iterator(sites.len(), (0..sites.len()).map(|_| StandardNormal.sample(rng)));
    Ok((l * z).iter().copied().collect())
}

/// Settings of the copula-transformed skew-Gaussian Poisson field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkewFieldConfig {
    pub sigma1: f64,
    pub sigma2: f64,
    pub gp_range: f64,
    pub lambda0: f64,
    pub n_sites: usize,
    pub seed: u64,
}

impl Default for SkewFieldConfig {
    fn default() -> Self {
        SkewFieldConfig {
            sigma1: 3.0,
            sigma2: 1.0,
            gp_range: 0.1,
            lambda0: 5.0,
            n_sites: 1000,
            seed: 1,
        }
    }
}

/// Marginal cdf of `σ1|ω1| + σ2 ω2`, the skew-normal with density
/// `2 N(z | 0, σ1² + σ2²) Φ(σ1 z / (σ2 √(σ1² + σ2²)))`, by quadrature.
#[derive(Debug, Clone, Copy)]
pub struct SkewNormalCdf {
    scale: f64,
    alpha: f64,
}

impl SkewNormalCdf {
    pub fn new(sigma1: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma1.is_finite()) {
            return Err(Error::invalid("sigma2 must be positive and sigma1 finite"));
        }
        Ok(SkewNormalCdf {
            scale: (sigma1 * sigma1 + sigma2 * sigma2).sqrt(),
            alpha: sigma1 / sigma2,
        })
    }

    pub fn pdf(&self, z: f64) -> f64 {
        let w = z / self.scale;
        2.0 * norm_pdf(w) * norm_cdf(self.alpha * w) / self.scale
    }

    /// `F_Z(z)`, integrating whichever tail is smaller.
    pub fn cdf(&self, z: f64) -> f64 {
        let w = z / self.scale;
        let a = self.alpha;
        let f = move |x: f64| 2.0 * norm_pdf(x) * norm_cdf(a * x);
        let tol = 1e-13;
        if w <= 0.0 {
            integrate_lower_tail(f, w, tol).clamp(0.0, 1.0)
        } else {
            let upper = integrate_lower_tail(move |x| f(-x), -w, tol);
            (1.0 - upper).clamp(0.0, 1.0)
        }
    }
}

/// Counts `F_Y⁻¹(F_Z(z))` with `F_Y` Poisson(λ0) at the given sites.
pub fn skew_field_counts(config: &SkewFieldConfig, sites: &[Location]) -> Result<Vec<u64>> {
    if !(config.gp_range > 0.0 && config.lambda0 > 0.0) {
        return Err(Error::invalid("gp range and lambda0 must be positive"));
    }
    let fz = SkewNormalCdf::new(config.sigma1, config.sigma2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_f1e1d);
    let l = exponential_cov_factor(sites, config.gp_range, 1.0)?;
    let n = sites.len();
    let mut draw = || -> Vec<f64> {
        let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        (&l * z).iter().copied().collect()
    };
    let w1 = draw();
    let w2 = draw();
    let fy = CountDist::poisson(config.lambda0)?;
    (0..n)
        .map(|j| {
            let z = config.sigma1 * w1[j].abs() + config.sigma2 * w2[j];
            let u = fz.cdf(z).clamp(1e-300, 1.0 - 1e-16);
            fy.quantile(u)
        })
        .collect()
}

/// Skew-field dataset on `n_sites` grid cells, intercept-only design.
pub fn skew_field_dataset(config: &SkewFieldConfig) -> Result<CountData> {
    let sites = grid_sites(config.n_sites, GRID_RESOLUTION, config.seed)?;
    let counts = skew_field_counts(config, &sites)?;
    CountData::intercept_only(sites, counts)
}

/// Settings of the Poisson spatial GLMM field with a linear trend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SglmmConfig {
    pub beta: [f64; 3],
    pub gp_sigma2: f64,
    pub gp_range: f64,
    pub n_sites: usize,
    pub seed: u64,
}

impl Default for SglmmConfig {
    fn default() -> Self {
        SglmmConfig {
            beta: [1.5, 1.0, 2.0],
            gp_sigma2: 0.2,
            gp_range: 1.0 / 12.0,
            n_sites: 1000,
            seed: 1,
        }
    }
}

/// `y_j ~ Poisson(exp(β0 + x_j β1 + y_j β2 + z_j))` with `z` a GP draw.
pub fn sglmm_counts(config: &SglmmConfig, sites: &[Location]) -> Result<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6c33);
    let z = gp_sample_with(sites, config.gp_range, config.gp_sigma2, &mut rng)?;
    let b = config.beta;
    sites
        .iter()
        .zip(&z)
        .map(|(s, zj)| {
            let mu = (b[0] + b[1] * s.x + b[2] * s.y + zj).exp();
            let p = Poisson::new(mu).map_err(|e| Error::numerical(format!("poisson mean {mu}: {e}")))?;
            Ok(p.sample(&mut rng) as u64)
        })
        .collect()
}

/// SGLMM dataset on grid cells with design `(1, x, y)`.
pub fn sglmm_dataset(config: &SglmmConfig) -> Result<CountData> {
    let sites = grid_sites(config.n_sites, GRID_RESOLUTION, config.seed)?;
    let counts = sglmm_counts(config, &sites)?;
    CountData::with_coordinate_covariates(sites, counts)
}

/// All fixed quantities of a discrete copula NNMP.
#[derive(Debug, Clone, PartialEq)]
pub struct NnmpParams {
    pub marginal: MarginalParams,
    pub copula: CopulaSpec,
    pub weights: WeightParams,
}

impl NnmpParams {
    fn dist(&self, covariates: &Covariates, i: usize) -> Result<CountDist> {
        self.marginal.dist(covariates.row(i))
    }

    /// Mixture weights of ordered site `i ≥ 1`.
    pub fn site_weights(&self, reference: &OrderedReferenceSet, i: usize) -> Result<Vec<f64>> {
        let site = reference.site(i);
        let nb: Vec<Location> = reference.neighbors(i).iter().map(|&j| reference.site(j)).collect();
        if nb.len() == 1 {
            return Ok(vec![1.0]);
        }
        let c = cutoffs(&site, &nb, self.weights.zeta)?;
        Ok(mixture_weights(&c, &self.weights, &site))
    }
}

/// How a forward draw conditions on an earlier site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// The discrete model: each conditional uses a fresh uniform inside the
    /// neighbor's probability step, so `(y_1..y_n)` follows the product of
    /// discrete conditional pmfs exactly.
    Discrete,
    /// The continued model: every site keeps one jitter `o`, shared by all
    /// sites that condition on it, so `(y*_1..y*_n)` follows the augmented
    /// continuous model.
    Continued,
}

/// A forward draw: counts plus the jitters (meaningful in continued mode).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardDraw {
    pub counts: Vec<u64>,
    pub o: Vec<f64>,
}

/// Sequential draw along the ordering: the first site from its marginal, each
/// later site by choosing a component from the weights and inverting the
/// conditional copula at the chosen neighbor.
pub fn nnmp_forward_sample<R: Rng + ?Sized>(
    reference: &OrderedReferenceSet,
    covariates: &Covariates,
    params: &NnmpParams,
    mode: ForwardMode,
    rng: &mut R,
) -> Result<ForwardDraw> {
    let n = reference.len();
    if covariates.nrow() != n {
        return Err(Error::invalid("covariate rows differ from the number of sites"));
    }
    let dists: Vec<CountDist> = (0..n).map(|i| params.dist(covariates, i)).collect::<Result<_>>()?;
    let weights: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            if i == 0 {
                Ok(Vec::new())
            } else {
                params.site_weights(reference, i)
            }
        })
        .collect::<Result<_>>()?;
    forward_with(reference, &dists, &weights, &params.copula, mode, rng)
}

/// Forward draw with precomputed site distributions and weights (for
/// replicate studies).
pub fn forward_with<R: Rng + ?Sized>(
    reference: &OrderedReferenceSet,
    dists: &[CountDist],
    weights: &[Vec<f64>],
    copula: &CopulaSpec,
    mode: ForwardMode,
    rng: &mut R,
) -> Result<ForwardDraw> {
    let n = reference.len();
    let mut counts = vec![0u64; n];
    let mut o = vec![0.5; n];
    let mut lw: Vec<f64> = Vec::new();
    for i in 0..n {
        let (y, oi) = if i == 0 {
            let t = open01(rng);
            let ys = dists[0].continued_inverse(t)?;
            split(ys)
        } else {
            lw.clear();
            lw.extend(weights[i].iter().map(|w| w.ln()));
            let l = sample_log_categorical(rng, &lw).ok_or_else(|| Error::numerical("degenerate weights"))?;
            let j = reference.neighbors(i)[l];
            let d = reference.site(i).distance(&reference.site(j));
            let param = copula.link(d)?;
            let (below, g) = dists[j].cdf_below_and_pmf(counts[j]);
            let jitter = match mode {
                ForwardMode::Discrete => open01(rng),
                ForwardMode::Continued => o[j],
            };
            let t2 = (below + (1.0 - jitter) * g).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
            let z = open01(rng);
            let t1 = param.conditional_sample(t2, z)?;
            let t1 = t1.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
            split(dists[i].continued_inverse(t1)?)
        };
        counts[i] = y;
        o[i] = oi;
    }
    Ok(ForwardDraw { counts, o })
}

fn split(y_star: f64) -> (u64, f64) {
    let y = ContinuedValue::count_of(y_star);
    let o = (y as f64 - y_star).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    (y, o)
}

/// Discrete conditional pmf `f(y_i | y_j)` of one mixture component:
/// the copula rectangle over the two probability steps divided by `g_j(y_j)`.
pub fn component_pmf(
    param: &crate::copula::CopulaParam,
    di: &CountDist,
    dj: &CountDist,
    yi: u64,
    yj: u64,
) -> Result<f64> {
    let gj = dj.pmf(yj);
    if gj <= 0.0 {
        return Err(Error::numerical("conditioning count has zero probability"));
    }
    let joint = discrete_pmf(param, |k| di.cdf(k), |k| dj.cdf(k), yi as i64, yj as i64)?;
    Ok(joint / gj)
}

/// Joint pmf of counts at the reference sites as the sequential product
/// `g_1(y_1) Π_{i≥2} Σ_l w_l(s_i) f_{i,l}(y_i | y_(il))`.
pub fn sequential_joint_pmf(
    counts: &[u64],
    reference: &OrderedReferenceSet,
    covariates: &Covariates,
    params: &NnmpParams,
) -> Result<f64> {
    let n = reference.len();
    if counts.len() != n {
        return Err(Error::invalid("count vector length differs from the reference set"));
    }
    let dists: Vec<CountDist> = (0..n).map(|i| params.dist(covariates, i)).collect::<Result<_>>()?;
    let mut p = dists[0].pmf(counts[0]);
    for i in 1..n {
        let w = params.site_weights(reference, i)?;
        let mut cond = 0.0;
        for (l, &j) in reference.neighbors(i).iter().enumerate() {
            let d = reference.site(i).distance(&reference.site(j));
            let param = params.copula.link(d)?;
            cond += w[l] * component_pmf(&param, &dists[i], &dists[j], counts[i], counts[j])?;
        }
        p *= cond;
    }
    Ok(p)
}

impl CopulaFamily {
    /// Convenience: the family with link range `phi`.
    pub fn with_range(self, phi: f64) -> Result<CopulaSpec> {
        CopulaSpec::new(self, phi)
    }
}
