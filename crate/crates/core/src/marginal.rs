//! Spatially varying count marginals and their continuous extension.
//!
//! A count `Y` with pmf `g` and cdf `Q` is jittered to `Y* = Y - O` with
//! `O ~ Unif(0,1)`. `Y*` has the piecewise-constant density
//! `g*(y*) = g(⌊y*⌋ + 1)` on `(-1, ∞)` and the piecewise-linear cdf
//! `Q*(y*) = Q(⌊y*⌋) + (y* - ⌊y*⌋) g(⌊y*⌋ + 1)`. The integer part is a floor,
//! so the formulas stay valid on `(-1, 0)`.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};

/// Below this log mass at zero the cdf recurrence would underflow, so the
/// regularized incomplete gamma/beta functions are used instead.
const LN_PMF0_FLOOR: f64 = -600.0;
const SUMMATION_MAX_K: u64 = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalFamily {
    Poisson,
    #[serde(alias = "nb", alias = "negative_binomial")]
    NegBinom,
}

impl MarginalFamily {
    pub fn name(&self) -> &'static str {
        match self {
            MarginalFamily::Poisson => "poisson",
            MarginalFamily::NegBinom => "negbinom",
        }
    }
}

impl std::fmt::Display for MarginalFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MarginalFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(MarginalFamily::Poisson),
            "negbinom" | "nb" | "negative_binomial" => Ok(MarginalFamily::NegBinom),
            other => Err(Error::config(format!("unknown marginal family `{other}`"))),
        }
    }
}

/// Parameters of the marginal family. The Poisson rate is shared by all
/// sites; the negative binomial mean follows `ln μ(v) = x(v)ᵀβ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum MarginalParams {
    Poisson {
        lambda: f64,
    },
    #[serde(rename = "negbinom")]
    NegBinom {
        beta: Vec<f64>,
        r: f64,
    },
}

impl MarginalParams {
    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("poisson rate must be positive, got {lambda}")));
        }
        Ok(MarginalParams::Poisson { lambda })
    }

    pub fn negbinom(beta: Vec<f64>, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid(format!("dispersion r must be positive, got {r}")));
        }
        if beta.is_empty() || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("regression coefficients must be finite and nonempty"));
        }
        Ok(MarginalParams::NegBinom { beta, r })
    }

    pub fn family(&self) -> MarginalFamily {
        match self {
            MarginalParams::Poisson { .. } => MarginalFamily::Poisson,
            MarginalParams::NegBinom { .. } => MarginalFamily::NegBinom,
        }
    }

    /// Count distribution at a site with covariate row `x` (intercept included).
    /// Poisson ignores `x`.
    pub fn dist(&self, x: &[f64]) -> Result<CountDist> {
        match self {
            MarginalParams::Poisson { lambda } => CountDist::poisson(*lambda),
            MarginalParams::NegBinom { beta, r } => {
                if x.len() != beta.len() {
                    return Err(Error::invalid(format!(
                        "covariate row has {} entries, model expects {}",
                        x.len(),
                        beta.len()
                    )));
                }
                let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
                CountDist::negbinom(eta.exp(), *r)
            }
        }
    }
}

/// Row-major covariate matrix, one row per site, intercept column included.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Covariates {
    ncol: usize,
    values: Vec<f64>,
}

impl Covariates {
    pub fn new(ncol: usize, values: Vec<f64>) -> Result<Self> {
        if ncol == 0 && !values.is_empty() {
            return Err(Error::invalid("zero-column covariates cannot carry values"));
        }
        if ncol > 0 && !values.len().is_multiple_of(ncol) {
            return Err(Error::invalid(format!(
                "{} covariate values do not fill rows of width {ncol}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("covariates must be finite"));
        }
        Ok(Covariates { ncol, values })
    }

    /// Rows built as `(1, extra...)`.
    pub fn with_intercept(rows: &[Vec<f64>]) -> Result<Self> {
        let ncol = rows.first().map_or(1, |r| r.len() + 1);
        let mut values = Vec::with_capacity(rows.len() * ncol);
        for (i, r) in rows.iter().enumerate() {
            if r.len() + 1 != ncol {
                return Err(Error::data(format!("covariate row {i} has the wrong width")));
            }
            values.push(1.0);
            values.extend_from_slice(r);
        }
        Covariates::new(ncol, values)
    }

    /// An intercept-only design for `n` sites.
    pub fn intercept_only(n: usize) -> Self {
        Covariates {
            ncol: 1,
            values: vec![1.0; n],
        }
    }

    pub fn ncol(&self) -> usize {
        self.ncol
    }

    pub fn nrow(&self) -> usize {
        self.values.len().checked_div(self.ncol).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.ncol..(i + 1) * self.ncol]
    }

    /// Rows reordered by `perm` (new row k is old row `perm[k]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for &p in perm {
            values.extend_from_slice(self.row(p));
        }
        Covariates {
            ncol: self.ncol,
            values,
        }
    }
}

/// Marginal parameters bound to the covariates of a set of sites.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalModel {
    pub params: MarginalParams,
    pub covariates: Covariates,
}

impl MarginalModel {
    pub fn new(params: MarginalParams, covariates: Covariates) -> Result<Self> {
        if let MarginalParams::NegBinom { beta, .. } = &params {
            if covariates.ncol() != beta.len() {
                return Err(Error::invalid(format!(
                    "design has {} columns but beta has {} entries",
                    covariates.ncol(),
                    beta.len()
                )));
            }
        }
        Ok(MarginalModel { params, covariates })
    }

    /// A stationary Poisson marginal over `n` sites.
    pub fn poisson(lambda: f64, n: usize) -> Result<Self> {
        MarginalModel::new(MarginalParams::poisson(lambda)?, Covariates::intercept_only(n))
    }

    pub fn family(&self) -> MarginalFamily {
        self.params.family()
    }

    pub fn at(&self, site: usize) -> Result<CountDist> {
        match &self.params {
            MarginalParams::Poisson { lambda } => CountDist::poisson(*lambda),
            MarginalParams::NegBinom { .. } => {
                if site >= self.covariates.nrow() {
                    return Err(Error::invalid(format!("no covariates for site {site}")));
                }
                self.params.dist(self.covariates.row(site))
            }
        }
    }

    pub fn pmf(&self, site: usize, y: u64) -> Result<f64> {
        Ok(self.at(site)?.pmf(y))
    }

    pub fn ln_pmf(&self, site: usize, y: u64) -> Result<f64> {
        Ok(self.at(site)?.ln_pmf(y))
    }

    pub fn cdf(&self, site: usize, y: i64) -> Result<f64> {
        Ok(self.at(site)?.cdf(y))
    }

    pub fn quantile(&self, site: usize, t: f64) -> Result<u64> {
        self.at(site)?.quantile(t)
    }

    pub fn continued_cdf(&self, site: usize, y_star: f64) -> Result<f64> {
        self.at(site)?.continued_cdf(y_star)
    }

    pub fn continued_inverse(&self, site: usize, t: f64) -> Result<f64> {
        self.at(site)?.continued_inverse(t)
    }

    pub fn continued_pmf(&self, site: usize, y_star: f64) -> Result<f64> {
        self.at(site)?.continued_pmf(y_star)
    }
}

/// A count paired with its jitter: `y* = y - o`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuedValue {
    pub y: u64,
    pub o: f64,
}

impl ContinuedValue {
    pub fn new(y: u64, o: f64) -> Result<Self> {
        if !(o > 0.0 && o < 1.0) {
            return Err(Error::invalid(format!("jitter must lie in (0, 1), got {o}")));
        }
        Ok(ContinuedValue { y, o })
    }

    pub fn y_star(&self) -> f64 {
        self.y as f64 - self.o
    }

    /// The count recovered from a continued value, `⌊y* + 1⌋`.
    pub fn count_of(y_star: f64) -> u64 {
        (y_star + 1.0).floor().max(0.0) as u64
    }
}

/// A single-site count distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CountDist {
    Poisson {
        lambda: f64,
        ln_lambda: f64,
    },
    /// `p = r / (μ + r)` is the success probability.
    NegBinom {
        mu: f64,
        r: f64,
        ln_p: f64,
        ln_q: f64,
        ln_gamma_r: f64,
    },
}

impl CountDist {
    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("poisson rate must be positive, got {lambda}")));
        }
        Ok(CountDist::Poisson {
            lambda,
            ln_lambda: lambda.ln(),
        })
    }

    pub fn negbinom(mu: f64, r: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!(
                "negative binomial mean must be positive and finite, got {mu}"
            )));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid(format!("dispersion r must be positive, got {r}")));
        }
        let ln_total = (mu + r).ln();
        Ok(CountDist::NegBinom {
            mu,
            r,
            ln_p: r.ln() - ln_total,
            ln_q: mu.ln() - ln_total,
            ln_gamma_r: ln_gamma(r),
        })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            CountDist::Poisson { lambda, .. } => lambda,
            CountDist::NegBinom { mu, .. } => mu,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            CountDist::Poisson { lambda, .. } => lambda,
            CountDist::NegBinom { mu, r, .. } => mu + mu * mu / r,
        }
    }

    pub fn ln_pmf(&self, y: u64) -> f64 {
        let k = y as f64;
        match *self {
            CountDist::Poisson { lambda, ln_lambda } => k * ln_lambda - lambda - ln_gamma(k + 1.0),
            CountDist::NegBinom {
                r,
                ln_p,
                ln_q,
                ln_gamma_r,
                ..
            } => {
                let tail = if y == 0 { 0.0 } else { k * ln_q };
                ln_gamma(k + r) - ln_gamma_r - ln_gamma(k + 1.0) + r * ln_p + tail
            }
        }
    }

    pub fn pmf(&self, y: u64) -> f64 {
        self.ln_pmf(y).exp()
    }

    fn ln_pmf0(&self) -> f64 {
        match *self {
            CountDist::Poisson { lambda, .. } => -lambda,
            CountDist::NegBinom { r, ln_p, .. } => r * ln_p,
        }
    }

    /// `g(k+1) / g(k)`.
    #[inline]
    fn ratio(&self, k: u64) -> f64 {
        let k = k as f64;
        match *self {
            CountDist::Poisson { lambda, .. } => lambda / (k + 1.0),
            CountDist::NegBinom { r, ln_q, .. } => (k + r) / (k + 1.0) * ln_q.exp(),
        }
    }

    fn cdf_special(&self, y: u64) -> f64 {
        let k = y as f64;
        match *self {
            CountDist::Poisson { lambda, .. } => gamma_ur(k + 1.0, lambda),
            CountDist::NegBinom { r, ln_p, .. } => beta_reg(r, k + 1.0, ln_p.exp()),
        }
    }

    fn summation_ok(&self, y: u64) -> bool {
        self.ln_pmf0() > LN_PMF0_FLOOR && y <= SUMMATION_MAX_K
    }

    /// `(Q(y-1), g(y))`, the two numbers the continued cdf needs at count `y`.
    pub fn cdf_below_and_pmf(&self, y: u64) -> (f64, f64) {
        if self.summation_ok(y) {
            let mut term = self.ln_pmf0().exp();
            let mut below = 0.0;
            for k in 0..y {
                below += term;
                term *= self.ratio(k);
            }
            // Recompute g(y) directly: the recurrence drifts slowly for large y.
            let g = if y > 50 { self.pmf(y) } else { term };
            (below.min(1.0), g)
        } else {
            let below = if y == 0 { 0.0 } else { self.cdf_special(y - 1) };
            (below, self.pmf(y))
        }
    }

    /// `Q(y) = P(Y ≤ y)`, zero for negative `y`.
    pub fn cdf(&self, y: i64) -> f64 {
        if y < 0 {
            return 0.0;
        }
        let (below, g) = self.cdf_below_and_pmf(y as u64);
        (below + g).min(1.0)
    }

    /// `min{k ≥ 0 : Q(k) ≥ t}` for `t ∈ (0, 1)`.
    pub fn quantile(&self, t: f64) -> Result<u64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::invalid(format!("quantile level must lie in (0, 1), got {t}")));
        }
        Ok(self.quantile_with_cdf(t).0)
    }

    /// Quantile `m` together with `Q(m-1)` and `g(m)`.
    fn quantile_with_cdf(&self, t: f64) -> (u64, f64, f64) {
        if self.ln_pmf0() > LN_PMF0_FLOOR {
            let mean = self.mean();
            let mut term = self.ln_pmf0().exp();
            let mut below = 0.0;
            let mut k = 0u64;
            loop {
                if below + term >= t {
                    return (k, below, term);
                }
                // Past the mean with a vanishing increment, the sum cannot grow
                // any further in floating point: t is beyond the representable cdf.
                if k as f64 > mean && (term <= f64::EPSILON * 1e-3 || k >= SUMMATION_MAX_K) {
                    return (k, below, term);
                }
                below += term;
                term *= self.ratio(k);
                k += 1;
            }
        }
        // Bisection on the special-function cdf.
        let mut lo = 0u64;
        let mut hi = (self.mean() + 10.0 * self.variance().sqrt() + 10.0) as u64;
        while self.cdf_special(hi) < t {
            hi *= 2;
        }
        if self.cdf_special(0) >= t {
            return (0, 0.0, self.pmf(0));
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.cdf_special(mid) >= t {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (hi, self.cdf_special(hi - 1), self.pmf(hi))
    }

    /// `Q*(y*)` for `y* > -1`.
    pub fn continued_cdf(&self, y_star: f64) -> Result<f64> {
        if !(y_star > -1.0) || !y_star.is_finite() {
            return Err(Error::invalid(format!("continued value must exceed -1, got {y_star}")));
        }
        let fl = y_star.floor();
        let frac = y_star - fl;
        let m = (fl + 1.0) as u64;
        let (below, g) = self.cdf_below_and_pmf(m);
        Ok((below + frac * g).min(1.0))
    }

    /// `Q*(y - o)` for a jittered count.
    #[inline]
    pub fn continued_cdf_at(&self, v: ContinuedValue) -> f64 {
        let (below, g) = self.cdf_below_and_pmf(v.y);
        (below + (1.0 - v.o) * g).min(1.0)
    }

    /// `g*(y*) = g(⌊y*⌋ + 1)`.
    pub fn continued_pmf(&self, y_star: f64) -> Result<f64> {
        if !(y_star > -1.0) || !y_star.is_finite() {
            return Err(Error::invalid(format!("continued value must exceed -1, got {y_star}")));
        }
        Ok(self.pmf((y_star.floor() + 1.0) as u64))
    }

    /// The unique `y*` with `Q*(y*) = t`, `t ∈ (0, 1)`.
    pub fn continued_inverse(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::invalid(format!("probability must lie in (0, 1), got {t}")));
        }
        let (m, below, g) = self.quantile_with_cdf(t);
        let frac = if g > 0.0 {
            ((t - below) / g).clamp(0.0, 1.0)
        } else {
            1.0
        };
        Ok((m as f64 - 1.0) + frac)
    }
}
