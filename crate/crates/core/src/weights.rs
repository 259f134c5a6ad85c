//! Mixture weights from logit-Gaussian increments at kernel-driven cutoffs.
//!
//! For a site with neighbors at distances `d_1 ≤ … ≤ d_L`, the cutoffs
//! `0 = r_0 < r_1 < … < r_L = 1` have increments proportional to
//! `exp(-d_l/ζ)`. With `r*_l = logit(r_l)` (so `r*_0 = -∞`, `r*_L = +∞`) the
//! weights are `w_l = Φ((r*_l - μ)/κ) - Φ((r*_{l-1} - μ)/κ)` where
//! `μ = γ0 + γ1 x + γ2 y`. Equivalently, `w_l` is the probability that
//! `t ~ N(μ, κ²)` falls in `(r*_{l-1}, r*_l)`, which is how the sampler uses it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Location;
use crate::stats::normal_interval_prob;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub gamma: [f64; 3],
    pub kappa2: f64,
    pub zeta: f64,
}

impl WeightParams {
    pub fn new(gamma: [f64; 3], kappa2: f64, zeta: f64) -> Result<Self> {
        if !(kappa2 > 0.0 && kappa2.is_finite()) {
            return Err(Error::invalid(format!("kappa2 must be positive, got {kappa2}")));
        }
        if !(zeta > 0.0 && zeta.is_finite()) {
            return Err(Error::invalid(format!("zeta must be positive, got {zeta}")));
        }
        if gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::invalid("gamma must be finite"));
        }
        Ok(WeightParams { gamma, kappa2, zeta })
    }

    /// Mean of the latent Gaussian at `site`.
    #[inline]
    pub fn mean_at(&self, site: &Location) -> f64 {
        self.gamma[0] + self.gamma[1] * site.x + self.gamma[2] * site.y
    }

    pub fn kappa(&self) -> f64 {
        self.kappa2.sqrt()
    }
}

/// Cutoffs on the probability scale and on the logit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffVector {
    r: Vec<f64>,
    r_star: Vec<f64>,
}

impl CutoffVector {
    /// `(r_0, …, r_L)` with `r_0 = 0`, `r_L = 1`.
    pub fn r(&self) -> &[f64] {
        &self.r
    }

    /// `(r*_0, …, r*_L)` with infinite endpoints.
    pub fn r_star(&self) -> &[f64] {
        &self.r_star
    }

    pub fn n_components(&self) -> usize {
        self.r.len() - 1
    }

    /// Logit-scale interval `(r*_{l-1}, r*_l)` of component `l` (0-based).
    #[inline]
    pub fn interval(&self, l: usize) -> (f64, f64) {
        (self.r_star[l], self.r_star[l + 1])
    }

    /// Component whose logit interval contains `t`.
    pub fn component_of(&self, t: f64) -> usize {
        let inner = &self.r_star[1..self.r_star.len() - 1];
        inner.partition_point(|&c| c < t)
    }
}

/// Cutoffs for a site from the distances to its ordered neighbors.
pub fn cutoffs_from_distances(distances: &[f64], zeta: f64) -> Result<CutoffVector> {
    if distances.is_empty() {
        return Err(Error::invalid("cutoffs need at least one neighbor"));
    }
    if !(zeta > 0.0) {
        return Err(Error::invalid(format!("zeta must be positive, got {zeta}")));
    }
    if distances.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
        return Err(Error::invalid("distances must be finite and nonnegative"));
    }
    let mut r = Vec::with_capacity(distances.len() + 1);
    let mut r_star = Vec::with_capacity(distances.len() + 1);
    cutoffs_into(distances, zeta, &mut r, &mut r_star);
    Ok(CutoffVector { r, r_star })
}

/// Allocation-free core used by the sampler. Kernel values are shifted by the
/// nearest distance so the sum never underflows, and each logit is formed from
/// the head and tail sums separately to avoid cancellation near 1.
pub(crate) fn cutoffs_into(distances: &[f64], zeta: f64, r: &mut Vec<f64>, r_star: &mut Vec<f64>) {
    let d0 = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let n = distances.len();
    r.clear();
    r_star.clear();
    r.push(0.0);
    r_star.push(f64::NEG_INFINITY);
    // tail[l] = Σ_{j ≥ l} k_j, computed from the far end (smallest terms first).
    let mut tail = vec![0.0; n + 1];
    for j in (0..n).rev() {
        tail[j] = tail[j + 1] + (-(distances[j] - d0) / zeta).exp();
    }
    let total = tail[0];
    let mut head = 0.0;
    for j in 0..n - 1 {
        head += (-(distances[j] - d0) / zeta).exp();
        let rest = tail[j + 1];
        r.push(head / total);
        r_star.push(head.ln() - rest.ln());
    }
    r.push(1.0);
    r_star.push(f64::INFINITY);
}

/// Cutoffs for `site` given its ordered neighbor locations.
pub fn cutoffs(site: &Location, neighbors: &[Location], zeta: f64) -> Result<CutoffVector> {
    let d: Vec<f64> = neighbors.iter().map(|n| site.distance(n)).collect();
    cutoffs_from_distances(&d, zeta)
}

/// Weights `w_l` for a latent mean `mu` and standard deviation `kappa`.
pub fn weights_from_mean(c: &CutoffVector, mu: f64, kappa: f64) -> Vec<f64> {
    (0..c.n_components())
        .map(|l| {
            let (lo, hi) = c.interval(l);
            normal_interval_prob(mu, kappa, lo, hi)
        })
        .collect()
}

pub fn mixture_weights(c: &CutoffVector, params: &WeightParams, site: &Location) -> Vec<f64> {
    weights_from_mean(c, params.mean_at(site), params.kappa())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn one_neighbor_single_component() {
        let c = cutoffs_from_distances(&[0.3], 0.1).unwrap();
        assert_eq!(c.r(), &[0.0, 1.0]);
        let p = WeightParams::new([0.4, -2.0, 1.0], 0.5, 0.1).unwrap();
        assert_eq!(mixture_weights(&c, &p, &Location::new(0.2, 0.3)), vec![1.0]);
    }

    #[test]
    fn equidistant_pair_is_symmetric() {
        let c = cutoffs_from_distances(&[0.2, 0.2], 0.1).unwrap();
        assert!((c.r()[1] - 0.5).abs() < 1e-15);
        assert_eq!(c.r_star()[1], 0.0);
        let w = weights_from_mean(&c, 0.0, 1.0);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kernel_increments() {
        let c = cutoffs_from_distances(&[0.1, 0.2, 0.4], 0.2).unwrap();
        let k = [(-0.5f64).exp(), (-1.0f64).exp(), (-2.0f64).exp()];
        let s: f64 = k.iter().sum();
        assert!((c.r()[1] - k[0] / s).abs() < 1e-15);
        assert!((c.r()[2] - (k[0] + k[1]) / s).abs() < 1e-15);
        let logit = |r: f64| (r / (1.0 - r)).ln();
        assert!((c.r_star()[2] - logit((k[0] + k[1]) / s)).abs() < 1e-13);
    }

    #[test]
    fn weights_sum_to_one() {
        let c = cutoffs_from_distances(&[0.05, 0.07, 0.1, 0.11, 0.2, 0.25, 0.3, 0.31, 0.5, 0.8], 0.1).unwrap();
        for &mu in &[-30.0, -3.0, -1.5, 0.0, 2.0, 40.0] {
            for &kappa in &[0.01, 0.3, 1.0, 5.0] {
                let w = weights_from_mean(&c, mu, kappa);
                assert!(w.iter().all(|&x| x >= 0.0));
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        let w = weights_from_mean(&c, -1e3, 1.0);
        assert!((w[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tiny_range_does_not_underflow() {
        let c = cutoffs_from_distances(&[10.0, 10.5, 50.0], 1e-3).unwrap();
        assert!(c.r_star().iter().all(|x| !x.is_nan()));
        assert!(c.r_star()[1] > 400.0);
    }

    #[test]
    fn component_lookup() {
        let c = cutoffs_from_distances(&[0.1, 0.2, 0.4], 0.2).unwrap();
        assert_eq!(c.component_of(-50.0), 0);
        assert_eq!(c.component_of(c.r_star()[1] + 1e-9), 1);
        assert_eq!(c.component_of(50.0), 2);
    }

    #[test]
    fn monte_carlo_matches_weights() {
        let c = cutoffs_from_distances(&[0.1, 0.15, 0.3, 0.32], 0.2).unwrap();
        let p = WeightParams::new([-1.5, 0.4, 0.9], 1.3, 0.2).unwrap();
        let site = Location::new(0.4, 0.7);
        let w = mixture_weights(&c, &p, &site);
        let normal = Normal::new(p.mean_at(&site), p.kappa()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 1_000_000;
        let mut counts = vec![0usize; w.len()];
        for _ in 0..n {
            counts[c.component_of(normal.sample(&mut rng))] += 1;
        }
        for (l, &k) in counts.iter().enumerate() {
            let phat = k as f64 / n as f64;
            let se = (w[l] * (1.0 - w[l]) / n as f64).sqrt();
            assert!(
                (phat - w[l]).abs() < 3.0 * se + 1e-12,
                "component {l}: {phat} vs {}",
                w[l]
            );
        }
    }
}
