//! Randomized quantile residuals and proper scoring rules.

use serde::{Deserialize, Serialize};

use crate::copula::{link_value, CopulaParam};
use crate::data::{CountData, ReferenceData};
use crate::error::{Error, Result};
use crate::marginal::{ContinuedValue, CountDist};
use crate::mcmc::{ModelSpec, ModelState};
use crate::predict::{predictive_draws, PredictionTarget};
use crate::stats::{norm_cdf, norm_quantile, quantile_sorted};

/// Residuals are computed from probabilities clamped to this distance from 0 and 1.
pub const RESIDUAL_CLAMP: f64 = 1e-15;

/// Residuals of one or more posterior samples, in reference order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSet {
    pub per_sample: Vec<Vec<f64>>,
    /// How many probabilities had to be clamped away from 0 or 1.
    pub clamped: usize,
}

impl ResidualSet {
    pub fn n_sites(&self) -> usize {
        self.per_sample.first().map_or(0, |r| r.len())
    }

    /// Pointwise posterior mean residual.
    pub fn posterior_mean(&self) -> Vec<f64> {
        let k = self.per_sample.len() as f64;
        (0..self.n_sites())
            .map(|i| self.per_sample.iter().map(|r| r[i]).sum::<f64>() / k)
            .collect()
    }

    /// Pointwise `p`-quantile across samples.
    pub fn pointwise_quantile(&self, p: f64) -> Vec<f64> {
        (0..self.n_sites())
            .map(|i| {
                let mut v: Vec<f64> = self.per_sample.iter().map(|r| r[i]).collect();
                v.sort_by(f64::total_cmp);
                quantile_sorted(&v, p)
            })
            .collect()
    }
}

/// Residuals of one state: `Φ⁻¹(Q*_1(y*_1))` for the first site and
/// `Φ⁻¹(Σ_l w_l C_{1|2}(Q*_i(y*_i) | Q*_(il)(y*_(il))))` after it.
/// Returns the residuals and the number of clamped probabilities.
pub fn quantile_residuals(sample: &ModelState, data: &ReferenceData, spec: &ModelSpec) -> Result<(Vec<f64>, usize)> {
    let n = data.len();
    if sample.o.len() != n {
        return Err(Error::invalid("sample jitters do not match the data"));
    }
    let dists: Vec<CountDist> = (0..n)
        .map(|i| sample.marginal.dist(data.covariates.row(i)))
        .collect::<Result<_>>()?;
    let pts: Vec<_> = (0..n)
        .map(|i| {
            let v = ContinuedValue::new(data.counts[i], sample.o[i])?;
            Ok(spec.copula.prepare(dists[i].continued_cdf_at(v)))
        })
        .collect::<Result<_>>()?;
    let mut clamped = 0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f = if i == 0 {
            pts[0].u
        } else {
            let w = sample.weights(data, i)?;
            let here = data.reference.site(i);
            data.reference
                .neighbors(i)
                .iter()
                .zip(&w)
                .map(|(&j, wl)| {
                    let d = here.distance(&data.reference.site(j));
                    let c = CopulaParam::new(spec.copula, link_value(spec.copula, sample.phi, d))
                        .expect("link values are in range");
                    wl * c.conditional_cdf_at(&pts[i], &pts[j])
                })
                .sum::<f64>()
        };
        let fc = f.clamp(RESIDUAL_CLAMP, 1.0 - RESIDUAL_CLAMP);
        if fc != f {
            clamped += 1;
        }
        out.push(norm_quantile(fc));
    }
    Ok((out, clamped))
}

/// Residuals of every sample.
pub fn residual_set(samples: &[ModelState], data: &ReferenceData, spec: &ModelSpec) -> Result<ResidualSet> {
    let mut per_sample = Vec::with_capacity(samples.len());
    let mut clamped = 0;
    for s in samples {
        let (r, c) = quantile_residuals(s, data, spec)?;
        per_sample.push(r);
        clamped += c;
    }
    Ok(ResidualSet { per_sample, clamped })
}

/// Anderson–Darling normality check with mean and variance estimated from
/// the sample, using Stephens' small-sample modification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AndersonDarling {
    pub statistic: f64,
    pub modified: f64,
    pub critical_5pct: f64,
}

impl AndersonDarling {
    pub const CRITICAL_5PCT: f64 = 0.752;

    pub fn passes(&self) -> bool {
        self.modified < self.critical_5pct
    }
}

pub fn anderson_darling(x: &[f64]) -> Result<AndersonDarling> {
    let n = x.len();
    if n < 8 {
        return Err(Error::invalid("the Anderson–Darling check needs at least 8 values"));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::invalid("constant sample"));
    }
    let mut z: Vec<f64> = x.iter().map(|v| (v - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let mut s = 0.0;
    for i in 0..n {
        let lo = norm_cdf(z[i]).max(1e-300).ln();
        let hi = norm_cdf(-z[n - 1 - i]).max(1e-300).ln();
        s += (2.0 * i as f64 + 1.0) * (lo + hi);
    }
    let a2 = -nf - s / nf;
    Ok(AndersonDarling {
        statistic: a2,
        modified: a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf)),
        critical_5pct: AndersonDarling::CRITICAL_5PCT,
    })
}

/// Predictive scores on held-out observations. `rmspe` uses the pooled
/// predictive median; `rmspe_mean` the predictive mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub rmspe: f64,
    pub rmspe_mean: f64,
    pub ci95_cover: f64,
    pub ci95_width: f64,
    pub crps: f64,
    pub es: f64,
    pub vs: f64,
}

/// `mean_{a,b} |x_a - x_b|` over all ordered pairs (including `a = b`), from
/// the sorted sample in O(D log D).
fn mean_abs_pair_diff(sorted: &[f64]) -> f64 {
    let d = sorted.len() as f64;
    let s: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * i as f64 + 1.0 - d) * x)
        .sum();
    2.0 * s / (d * d)
}

/// Scores of a predictive draw matrix `draws[d][j]` (draw `d`, site `j`)
/// against observations `y[j]`. Expectations over pairs of draws are taken
/// over all ordered pairs.
pub fn scores(y: &[f64], draws: &[Vec<f64>]) -> Result<ScoreReport> {
    let m = y.len();
    let nd = draws.len();
    if m == 0 {
        return Err(Error::invalid("no observations to score"));
    }
    if nd < 2 {
        return Err(Error::invalid("scores need at least two predictive draws"));
    }
    if let Some(k) = draws.iter().position(|r| r.len() != m) {
        return Err(Error::invalid(format!(
            "draw {k} has {} values for {m} observations",
            draws[k].len()
        )));
    }
    let mut se_med = 0.0;
    let mut se_mean = 0.0;
    let mut cover = 0usize;
    let mut width = 0.0;
    let mut crps = 0.0;
    let mut col = vec![0.0; nd];
    for j in 0..m {
        for (d, row) in draws.iter().enumerate() {
            col[d] = row[j];
        }
        col.sort_by(f64::total_cmp);
        let med = quantile_sorted(&col, 0.5);
        let mean = col.iter().sum::<f64>() / nd as f64;
        let lo = quantile_sorted(&col, 0.025);
        let hi = quantile_sorted(&col, 0.975);
        se_med += (med - y[j]).powi(2);
        se_mean += (mean - y[j]).powi(2);
        cover += (lo <= y[j] && y[j] <= hi) as usize;
        width += hi - lo;
        let mae = col.iter().map(|x| (x - y[j]).abs()).sum::<f64>() / nd as f64;
        crps += mae - 0.5 * mean_abs_pair_diff(&col);
    }
    let mf = m as f64;

    let norm = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let es_obs = draws.iter().map(|r| norm(r, y)).sum::<f64>() / nd as f64;
    let mut es_pair = 0.0;
    for a in 0..nd {
        for b in (a + 1)..nd {
            es_pair += norm(&draws[a], &draws[b]);
        }
    }
    // Each unordered pair counts twice among ordered pairs; diagonal terms are 0.
    let es = es_obs - 0.5 * (2.0 * es_pair / (nd as f64 * nd as f64));

    let mut vs = 0.0;
    for j in 0..m {
        for k in (j + 1)..m {
            let md = draws.iter().map(|r| (r[j] - r[k]).abs()).sum::<f64>() / nd as f64;
            vs += ((y[j] - y[k]).abs() - md).powi(2);
        }
    }

    Ok(ScoreReport {
        rmspe: (se_med / mf).sqrt(),
        rmspe_mean: (se_mean / mf).sqrt(),
        ci95_cover: cover as f64 / mf,
        ci95_width: width / mf,
        crps: crps / mf,
        es: es.max(0.0),
        vs,
    })
}

/// Transpose per-target draws (`per_target[j][d]`) into the draw-major layout
/// used by [`scores`].
pub fn draws_by_row(per_target: &[Vec<u64>]) -> Result<Vec<Vec<f64>>> {
    let nd = per_target.first().map_or(0, |v| v.len());
    if per_target.iter().any(|v| v.len() != nd) {
        return Err(Error::invalid("targets have different numbers of draws"));
    }
    Ok((0..nd)
        .map(|d| per_target.iter().map(|v| v[d] as f64).collect())
        .collect())
}

/// Predict every site of `holdout` from the posterior `samples` and score
/// the draws against the held-out counts.
pub fn holdout_scores(
    holdout: &CountData,
    samples: &[ModelState],
    data: &ReferenceData,
    spec: &ModelSpec,
    draws_per_sample: usize,
    seed: u64,
) -> Result<ScoreReport> {
    let targets: Vec<PredictionTarget> = (0..holdout.len())
        .map(|i| PredictionTarget::new(holdout.locations[i], holdout.covariates.row(i).to_vec()))
        .collect();
    let draws = predictive_draws(&targets, samples, data, spec, draws_per_sample, seed)?;
    let y: Vec<f64> = holdout.counts.iter().map(|&c| c as f64).collect();
    scores(&y, &draws_by_row(&draws)?)
}
