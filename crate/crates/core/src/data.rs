//! Observed counts and their arrangement over an ordered reference set.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geom::{Location, OrderedReferenceSet};
use crate::marginal::Covariates;

/// Counts at locations, in input order, with covariate rows (intercept
/// column included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountData {
    pub locations: Vec<Location>,
    pub counts: Vec<u64>,
    pub covariates: Covariates,
}

impl CountData {
    pub fn new(locations: Vec<Location>, counts: Vec<u64>, covariates: Covariates) -> Result<Self> {
        if locations.len() != counts.len() {
            return Err(Error::data(format!(
                "{} locations but {} counts",
                locations.len(),
                counts.len()
            )));
        }
        if covariates.nrow() != counts.len() {
            return Err(Error::data(format!(
                "{} covariate rows for {} sites",
                covariates.nrow(),
                counts.len()
            )));
        }
        if let Some(i) = locations.iter().position(|l| !l.is_finite()) {
            return Err(Error::data(format!("row {i}: non-finite coordinates")));
        }
        Ok(CountData {
            locations,
            counts,
            covariates,
        })
    }

    /// Counts with an intercept-plus-coordinates design `(1, x, y)`.
    pub fn with_coordinate_covariates(locations: Vec<Location>, counts: Vec<u64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = locations.iter().map(|l| vec![l.x, l.y]).collect();
        let cov = Covariates::with_intercept(&rows)?;
        CountData::new(locations, counts, cov)
    }

    /// Counts with an intercept-only design.
    pub fn intercept_only(locations: Vec<Location>, counts: Vec<u64>) -> Result<Self> {
        let n = counts.len();
        CountData::new(locations, counts, Covariates::intercept_only(n))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Rows `idx` of this dataset, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<CountData> {
        let locations = idx.iter().map(|&i| self.locations[i]).collect();
        let counts = idx.iter().map(|&i| self.counts[i]).collect();
        let covariates = self.covariates.permuted(idx);
        CountData::new(locations, counts, covariates)
    }

    /// Hex SHA-256 of the coordinates, counts and covariates, used to bind a
    /// stored posterior to the data it was fitted on.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.len() as u64).to_le_bytes());
        for (l, y) in self.locations.iter().zip(&self.counts) {
            h.update(l.x.to_le_bytes());
            h.update(l.y.to_le_bytes());
            h.update(y.to_le_bytes());
        }
        h.update((self.covariates.ncol() as u64).to_le_bytes());
        for i in 0..self.covariates.nrow() {
            for v in self.covariates.row(i) {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Data arranged along a reference ordering: everything the sampler, the
/// predictor and the residual code index by ordered position.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceData {
    pub reference: OrderedReferenceSet,
    pub counts: Vec<u64>,
    pub covariates: Covariates,
}

impl ReferenceData {
    pub fn new(data: &CountData, reference: OrderedReferenceSet) -> Result<Self> {
        if reference.len() != data.len() {
            return Err(Error::invalid("reference set and data differ in size"));
        }
        let perm = reference.permutation().to_vec();
        for (k, &p) in perm.iter().enumerate() {
            if reference.site(k) != data.locations[p] {
                return Err(Error::invalid("reference set was not built from these locations"));
            }
        }
        Ok(ReferenceData {
            counts: reference.reorder(&data.counts),
            covariates: data.covariates.permuted(&perm),
            reference,
        })
    }

    /// Random ordering with neighbor budget `max_neighbors`.
    pub fn random_ordering(data: &CountData, max_neighbors: usize, seed: u64) -> Result<Self> {
        let reference = OrderedReferenceSet::random_ordering(&data.locations, max_neighbors, seed)?;
        ReferenceData::new(data, reference)
    }

    /// Keep the input order.
    pub fn in_given_order(data: &CountData, max_neighbors: usize) -> Result<Self> {
        let reference = OrderedReferenceSet::in_given_order(&data.locations, max_neighbors)?;
        ReferenceData::new(data, reference)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Values in reference order mapped back to input order.
    pub fn to_input_order<T: Clone + Default>(&self, ordered: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); ordered.len()];
        for (k, &p) in self.reference.permutation().iter().enumerate() {
            out[p] = ordered[k].clone();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> CountData {
        let locs = vec![
            Location::new(0.1, 0.2),
            Location::new(0.5, 0.5),
            Location::new(0.9, 0.1),
            Location::new(0.3, 0.8),
        ];
        CountData::with_coordinate_covariates(locs, vec![3, 0, 7, 2]).unwrap()
    }

    #[test]
    fn reordering_round_trips() {
        let d = toy();
        let r = ReferenceData::random_ordering(&d, 2, 5).unwrap();
        for k in 0..d.len() {
            let p = r.reference.permutation()[k];
            assert_eq!(r.counts[k], d.counts[p]);
            assert_eq!(r.covariates.row(k)[1], d.locations[p].x);
        }
        assert_eq!(r.to_input_order(&r.counts), d.counts);
    }

    #[test]
    fn digest_is_content_sensitive() {
        let d = toy();
        let mut e = toy();
        e.counts[2] = 8;
        assert_eq!(d.digest(), toy().digest());
        assert_ne!(d.digest(), e.digest());
        assert_eq!(d.digest().len(), 64);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let locs = vec![Location::new(0.0, 0.0), Location::new(1.0, 0.0)];
        assert!(CountData::intercept_only(locs, vec![1]).is_err());
    }
}
