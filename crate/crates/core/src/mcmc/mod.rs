//! Metropolis-within-Gibbs sampler for the augmented model.
//!
//! Each count is jittered to `y* = y - o`, each site from the third on
//! carries a latent Gaussian `t_i ~ N(μ(s_i), κ²)` whose position among the
//! logit cutoffs selects the mixture component `ℓ_i`. One sweep updates, in
//! order: `(t, ℓ)` jointly and exactly, every `o_i` by an independence
//! Metropolis step, `γ` and `κ²` from their conjugate conditionals, the
//! marginal parameters, the copula range `φ`, and the kernel range `ζ`.
//! Positive scalars move by random walks on the log scale; `β` moves jointly
//! with a proposal shaped by a crude GLM information matrix. Proposal scales
//! adapt during burn-in only.

mod persist;
mod sampler;

pub use persist::{read_posterior, write_posterior, PosteriorHeader};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::copula::{link_value, CopulaFamily, CopulaParam};
use crate::data::ReferenceData;
use crate::error::{Error, Result};
use crate::marginal::{ContinuedValue, CountDist, MarginalFamily, MarginalParams};
use crate::weights::{cutoffs_from_distances, weights_from_mean};

/// `IG(shape, scale)` with density ∝ `x^{-shape-1} exp(-scale/x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseGamma {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGamma {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
            return Err(Error::config(format!(
                "inverse-gamma hyperparameters must be positive, got ({shape}, {scale})"
            )));
        }
        Ok(InverseGamma { shape, scale })
    }

    pub fn ln_pdf_unnorm(&self, x: f64) -> f64 {
        -(self.shape + 1.0) * x.ln() - self.scale / x
    }

    /// Mean when it exists, otherwise the mode.
    pub fn center(&self) -> f64 {
        if self.shape > 1.0 {
            self.scale / (self.shape - 1.0)
        } else {
            self.scale / (self.shape + 1.0)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            statrs::function::gamma::gamma_ur(self.shape, self.scale / x)
        }
    }
}

/// `Gamma(shape, rate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return Err(Error::config(format!(
                "gamma hyperparameters must be positive, got ({shape}, {rate})"
            )));
        }
        Ok(GammaPrior { shape, rate })
    }

    pub fn ln_pdf_unnorm(&self, x: f64) -> f64 {
        (self.shape - 1.0) * x.ln() - self.rate * x
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            statrs::function::gamma::gamma_lr(self.shape, self.rate * x)
        }
    }
}

/// Multivariate normal prior given by mean and covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrior {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl GaussianPrior {
    pub fn diagonal(mean: Vec<f64>, var: f64) -> Self {
        let p = mean.len();
        let cov = (0..p)
            .map(|i| (0..p).map(|j| if i == j { var } else { 0.0 }).collect())
            .collect();
        GaussianPrior { mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub(crate) fn covariance(&self) -> Result<nalgebra::DMatrix<f64>> {
        let p = self.mean.len();
        if self.cov.len() != p || self.cov.iter().any(|r| r.len() != p) {
            return Err(Error::config("prior covariance must be square and match the mean"));
        }
        let m = nalgebra::DMatrix::from_fn(p, p, |i, j| self.cov[i][j]);
        for i in 0..p {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (1.0 + m[(i, j)].abs()) {
                    return Err(Error::config("prior covariance must be symmetric"));
                }
            }
        }
        if m.clone().cholesky().is_none() {
            return Err(Error::config("prior covariance must be positive definite"));
        }
        Ok(m)
    }
}

/// Prior distributions of every model parameter. Defaults: IG(3, 1) for
/// `φ`, `ζ` and `κ²`; `N((-1.5, 0, 0), 2I)` for `γ`; Gamma(1, 1) for `λ` and
/// `r`; `N(0, 100 I)` for `β` (dimension taken from the design).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Priors {
    pub beta: Option<GaussianPrior>,
    pub gamma: GaussianPrior,
    pub kappa2: InverseGamma,
    pub phi: InverseGamma,
    pub zeta: InverseGamma,
    pub lambda: GammaPrior,
    pub r: GammaPrior,
}

impl Default for Priors {
    fn default() -> Self {
        Priors {
            beta: None,
            gamma: GaussianPrior::diagonal(vec![-1.5, 0.0, 0.0], 2.0),
            kappa2: InverseGamma { shape: 3.0, scale: 1.0 },
            phi: InverseGamma { shape: 3.0, scale: 1.0 },
            zeta: InverseGamma { shape: 3.0, scale: 1.0 },
            lambda: GammaPrior { shape: 1.0, rate: 1.0 },
            r: GammaPrior { shape: 1.0, rate: 1.0 },
        }
    }
}

impl Priors {
    pub fn beta_prior(&self, p: usize) -> GaussianPrior {
        self.beta
            .clone()
            .unwrap_or_else(|| GaussianPrior::diagonal(vec![0.0; p], 100.0))
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.gamma.dim() != 3 {
            return Err(Error::config("gamma prior must be three-dimensional"));
        }
        self.gamma.covariance()?;
        let b = self.beta_prior(p);
        if b.dim() != p {
            return Err(Error::config(format!(
                "beta prior has dimension {} but the design has {p} columns",
                b.dim()
            )));
        }
        b.covariance()?;
        for ig in [self.kappa2, self.phi, self.zeta] {
            InverseGamma::new(ig.shape, ig.scale)?;
        }
        for g in [self.lambda, self.r] {
            GammaPrior::new(g.shape, g.rate)?;
        }
        Ok(())
    }
}

/// Families and neighbor budget of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub marginal: MarginalFamily,
    pub copula: CopulaFamily,
    pub max_neighbors: usize,
}

/// Which blocks a sweep updates. Frozen blocks keep their initial values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpdateMask {
    pub t_ell: bool,
    pub o: bool,
    pub gamma: bool,
    pub kappa2: bool,
    pub marginal: bool,
    pub phi: bool,
    pub zeta: bool,
}

impl Default for UpdateMask {
    fn default() -> Self {
        UpdateMask {
            t_ell: true,
            o: true,
            gamma: true,
            kappa2: true,
            marginal: true,
            phi: true,
            zeta: true,
        }
    }
}

impl UpdateMask {
    pub fn only_marginal() -> Self {
        UpdateMask {
            t_ell: false,
            o: false,
            gamma: false,
            kappa2: false,
            marginal: true,
            phi: false,
            zeta: false,
        }
    }
}

/// Random-walk scales: log-scale standard deviations for the positive
/// scalars, and a multiplier of the GLM-shaped proposal for `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepSizes {
    pub lambda: f64,
    pub r: f64,
    pub beta: f64,
    pub phi: f64,
    pub zeta: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        StepSizes {
            lambda: 0.1,
            r: 0.2,
            beta: 1.0,
            phi: 0.3,
            zeta: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub steps: StepSizes,
    /// Robbins–Monro tuning of the random-walk scales during burn-in.
    pub adapt: bool,
    pub target_acceptance: f64,
    /// Drop every data term from the target, leaving the prior.
    pub prior_only: bool,
    pub updates: UpdateMask,
    /// Keep `t` and `ℓ` in stored samples (the jitters `o` are always kept).
    pub store_configuration: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_iter: 20_000,
            burnin: 4_000,
            thin: 4,
            seed: 1,
            steps: StepSizes::default(),
            adapt: true,
            target_acceptance: 0.35,
            prior_only: false,
            updates: UpdateMask::default(),
            store_configuration: false,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::config("thin must be at least 1"));
        }
        if self.burnin > self.n_iter {
            return Err(Error::config(format!(
                "burn-in {} exceeds the number of iterations {}",
                self.burnin, self.n_iter
            )));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::config("target acceptance must lie in (0, 1)"));
        }
        let s = self.steps;
        for v in [s.lambda, s.r, s.beta, s.phi, s.zeta] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config("step sizes must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.n_iter - self.burnin) / self.thin
    }
}

/// One state of the chain. Vectors are indexed by reference order. `t[i]` is
/// meaningful for `i ≥ 2` and `ell[i]` (0-based component) for `i ≥ 1`; the
/// leading entries are kept at zero. Stored samples may have empty `t`/`ell`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub marginal: MarginalParams,
    pub phi: f64,
    pub zeta: f64,
    pub gamma: [f64; 3],
    pub kappa2: f64,
    pub o: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub t: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ell: Vec<u32>,
}

impl ModelState {
    pub fn lambda(&self) -> Option<f64> {
        match self.marginal {
            MarginalParams::Poisson { lambda } => Some(lambda),
            _ => None,
        }
    }

    pub fn beta(&self) -> Option<&[f64]> {
        match &self.marginal {
            MarginalParams::NegBinom { beta, .. } => Some(beta),
            _ => None,
        }
    }

    pub fn r(&self) -> Option<f64> {
        match self.marginal {
            MarginalParams::NegBinom { r, .. } => Some(r),
            _ => None,
        }
    }

    /// Continued value `y_i - o_i` as a checked pair.
    pub fn continued(&self, data: &ReferenceData, i: usize) -> Result<ContinuedValue> {
        ContinuedValue::new(data.counts[i], self.o[i])
    }

    /// Mixture weights of ordered site `i ≥ 1` under this state.
    pub fn weights(&self, data: &ReferenceData, i: usize) -> Result<Vec<f64>> {
        let nb = data.reference.neighbors(i);
        if nb.is_empty() {
            return Err(Error::invalid("the first site has no mixture weights"));
        }
        if i == 1 {
            return Ok(vec![1.0]);
        }
        let site = data.reference.site(i);
        let d: Vec<f64> = nb.iter().map(|&j| site.distance(&data.reference.site(j))).collect();
        let c = cutoffs_from_distances(&d, self.zeta)?;
        let mu = self.gamma[0] + self.gamma[1] * site.x + self.gamma[2] * site.y;
        Ok(weights_from_mean(&c, mu, self.kappa2.sqrt()))
    }

    pub(crate) fn check(&self, data: &ReferenceData, spec: &ModelSpec) -> Result<()> {
        let n = data.len();
        if self.o.len() != n {
            return Err(Error::invalid(format!(
                "state has {} jitters for {n} sites",
                self.o.len()
            )));
        }
        if let Some(i) = self.o.iter().position(|&o| !(o > 0.0 && o < 1.0)) {
            return Err(Error::invalid(format!("jitter o[{i}] = {} outside (0, 1)", self.o[i])));
        }
        if self.marginal.family() != spec.marginal {
            return Err(Error::invalid("state marginal family differs from the model"));
        }
        if !(self.phi > 0.0 && self.zeta > 0.0 && self.kappa2 > 0.0) {
            return Err(Error::invalid("phi, zeta and kappa2 must be positive"));
        }
        if let MarginalParams::NegBinom { beta, .. } = &self.marginal {
            if beta.len() != data.covariates.ncol() {
                return Err(Error::invalid("beta length differs from the design width"));
            }
        }
        Ok(())
    }
}

/// Acceptance rates per Metropolis block.
pub type AcceptanceRates = BTreeMap<String, f64>;

/// Output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub spec: ModelSpec,
    pub priors: Priors,
    pub config: McmcConfig,
    pub samples: Vec<ModelState>,
    /// Post-burn-in acceptance rates (whole-run rates when there is no
    /// post-burn-in phase).
    pub acceptance: AcceptanceRates,
    /// Proposal scales after adaptation.
    pub final_steps: StepSizes,
    /// Final full state, including `t` and `ℓ`, for restarts.
    pub last_state: ModelState,
}

impl PosteriorSamples {
    pub fn lambda_draws(&self) -> Vec<f64> {
        self.samples.iter().filter_map(|s| s.lambda()).collect()
    }

    pub fn beta_draws(&self, k: usize) -> Vec<f64> {
        self.samples.iter().filter_map(|s| s.beta().map(|b| b[k])).collect()
    }

    /// Draws of a scalar extracted from each sample.
    pub fn draws<F: Fn(&ModelState) -> f64>(&self, f: F) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }
}

/// Starting state: `o = 1/2`, first component everywhere, `t` at the
/// conditional median of its interval, `φ`, `ζ`, `γ`, `κ²` at their prior
/// centers, and moment/least-squares estimates for the marginal.
pub fn initial_state(data: &ReferenceData, spec: &ModelSpec, priors: &Priors) -> Result<ModelState> {
    sampler::initial_state(data, spec, priors)
}

/// Run one chain from the default initial state.
pub fn run_chain(
    data: &ReferenceData,
    spec: &ModelSpec,
    priors: &Priors,
    config: &McmcConfig,
) -> Result<PosteriorSamples> {
    let init = initial_state(data, spec, priors)?;
    run_chain_from(data, spec, priors, config, init)
}

/// Run one chain from a given state. The state must carry full-length `t`
/// and `ell` vectors (or empty ones, which are then initialized).
pub fn run_chain_from(
    data: &ReferenceData,
    spec: &ModelSpec,
    priors: &Priors,
    config: &McmcConfig,
    init: ModelState,
) -> Result<PosteriorSamples> {
    config.validate()?;
    priors.validate(data.covariates.ncol())?;
    if spec.max_neighbors != data.reference.max_neighbors() {
        return Err(Error::invalid("model neighbor budget differs from the reference set"));
    }
    let mut chain = sampler::Chain::new(data, *spec, priors.clone(), config.clone(), init)?;
    chain.run()
}

/// Run several chains with seeds `seed, seed+1, …`, concurrently.
pub fn run_chains(
    data: &ReferenceData,
    spec: &ModelSpec,
    priors: &Priors,
    config: &McmcConfig,
    n_chains: usize,
) -> Result<Vec<PosteriorSamples>> {
    if n_chains == 0 {
        return Err(Error::config("at least one chain is required"));
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..n_chains)
            .map(|c| {
                let mut cfg = config.clone();
                cfg.seed = config.seed.wrapping_add(c as u64);
                scope.spawn(move || run_chain(data, spec, priors, &cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| Error::numerical("a chain panicked"))?)
            .collect()
    })
}

fn site_dists(state: &ModelState, data: &ReferenceData) -> Result<Vec<CountDist>> {
    (0..data.len())
        .map(|i| state.marginal.dist(data.covariates.row(i)))
        .collect()
}

/// Copula parameter between ordered site `i` and its `l`-th neighbor.
fn pair_param(state: &ModelState, data: &ReferenceData, family: CopulaFamily, i: usize, l: usize) -> CopulaParam {
    let j = data.reference.neighbors(i)[l];
    let d = data.reference.site(i).distance(&data.reference.site(j));
    CopulaParam::unchecked(family, link_value(family, state.phi, d))
}

fn continued_points(
    state: &ModelState,
    data: &ReferenceData,
    dists: &[CountDist],
    family: CopulaFamily,
) -> Result<Vec<crate::copula::UnitPoint>> {
    (0..data.len())
        .map(|i| {
            let v = state.continued(data, i)?;
            Ok(family.prepare(dists[i].continued_cdf_at(v)))
        })
        .collect()
}

/// Log-likelihood of the continued data given the configuration `ℓ`:
/// `ln g*_1(y*_1) + Σ_{i≥2} [ln g*_i(y*_i) + ln c*_{i,ℓ_i}(Q*_i(y*_i), Q*_{(iℓ_i)}(y*_{(iℓ_i)}))]`.
pub fn log_likelihood(state: &ModelState, data: &ReferenceData, spec: &ModelSpec) -> Result<f64> {
    state.check(data, spec)?;
    if state.ell.len() != data.len() {
        return Err(Error::invalid("the configuration-restricted likelihood needs full ell"));
    }
    let dists = site_dists(state, data)?;
    let pts = continued_points(state, data, &dists, spec.copula)?;
    let mut ll = 0.0;
    for i in 0..data.len() {
        ll += dists[i].ln_pmf(data.counts[i]);
        if i >= 1 {
            let l = state.ell[i] as usize;
            let j = data.reference.neighbors(i)[l];
            ll += pair_param(state, data, spec.copula, i, l).ln_density_at(&pts[i], &pts[j]);
        }
    }
    check_finite(ll, "log-likelihood")
}

/// Log-likelihood with the configuration summed out:
/// `ln g*_1(y*_1) + Σ_{i≥2} ln Σ_l w_l(s_i) c*_{i,l} g*_i(y*_i)`.
pub fn log_mixture_likelihood(state: &ModelState, data: &ReferenceData, spec: &ModelSpec) -> Result<f64> {
    state.check(data, spec)?;
    let dists = site_dists(state, data)?;
    let pts = continued_points(state, data, &dists, spec.copula)?;
    let mut ll = dists[0].ln_pmf(data.counts[0]);
    for i in 1..data.len() {
        let w = state.weights(data, i)?;
        let terms: Vec<f64> = w
            .iter()
            .enumerate()
            .map(|(l, &wl)| {
                let j = data.reference.neighbors(i)[l];
                wl.ln() + pair_param(state, data, spec.copula, i, l).ln_density_at(&pts[i], &pts[j])
            })
            .collect();
        ll += crate::stats::log_sum_exp(&terms) + dists[i].ln_pmf(data.counts[i]);
    }
    check_finite(ll, "log-likelihood")
}

fn check_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numerical(format!("{what} is not finite ({v})")))
    }
}
