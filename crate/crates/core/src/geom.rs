//! Locations, the randomly ordered reference set and nearest-neighbor sets.
//!
//! The reference set fixes a topological order on the observed sites. Site
//! `i` (0-based) conditions on at most `L` of the sites `0..i`, the closest
//! ones in Euclidean distance, sorted ascending with ties going to the lower
//! ordering index.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub fn new(x: f64, y: f64) -> Self {
        Location { x, y }
    }

    #[inline]
    pub fn distance(&self, other: &Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Project longitude/latitude in degrees to kilometres with an
/// equirectangular projection centred on `ref_lat_deg`.
pub fn equirectangular(lon_deg: f64, lat_deg: f64, ref_lat_deg: f64) -> Location {
    const EARTH_RADIUS_KM: f64 = 6371.0;
    let x = EARTH_RADIUS_KM * lon_deg.to_radians() * ref_lat_deg.to_radians().cos();
    let y = EARTH_RADIUS_KM * lat_deg.to_radians();
    Location::new(x, y)
}

/// Sites in a fixed order together with each site's neighbor list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedReferenceSet {
    sites: Vec<Location>,
    /// `permutation[i]` is the position in the caller's input of ordered site `i`.
    permutation: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
    max_neighbors: usize,
}

impl OrderedReferenceSet {
    /// Uniformly random ordering of `locations` driven by `seed`, with
    /// neighbor lists of length `min(i, max_neighbors)` for ordered site `i`.
    pub fn random_ordering(locations: &[Location], max_neighbors: usize, seed: u64) -> Result<Self> {
        let mut perm: Vec<usize> = (0..locations.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        perm.shuffle(&mut rng);
        Self::with_permutation(locations, perm, max_neighbors)
    }

    /// Keep the input order as the reference ordering.
    pub fn in_given_order(locations: &[Location], max_neighbors: usize) -> Result<Self> {
        Self::with_permutation(locations, (0..locations.len()).collect(), max_neighbors)
    }

    /// Rebuild from a stored permutation (the ordering of a persisted fit).
    pub fn with_permutation(locations: &[Location], permutation: Vec<usize>, max_neighbors: usize) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::invalid("a reference set needs at least one location"));
        }
        if max_neighbors == 0 {
            return Err(Error::invalid("neighbor budget L must be at least 1"));
        }
        if permutation.len() != locations.len() {
            return Err(Error::invalid("permutation length differs from location count"));
        }
        let mut seen = vec![false; locations.len()];
        for &p in &permutation {
            if p >= locations.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid("ordering is not a permutation"));
            }
        }
        if let Some(bad) = locations.iter().position(|l| !l.is_finite()) {
            return Err(Error::data(format!("location {bad} has non-finite coordinates")));
        }
        check_distinct(locations)?;

        let sites: Vec<Location> = permutation.iter().map(|&p| locations[p]).collect();
        let neighbors = (0..sites.len())
            .map(|i| nearest_among(&sites[i], &sites[..i], max_neighbors))
            .collect();
        Ok(OrderedReferenceSet {
            sites,
            permutation,
            neighbors,
            max_neighbors,
        })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Location] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> Location {
        self.sites[i]
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Neighbor budget `L`.
    pub fn max_neighbors(&self) -> usize {
        self.max_neighbors
    }

    /// Indices (in the ordering) of the neighbors of site `i`, closest first.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Reorder per-input values (counts, covariate rows) into the reference order.
    pub fn reorder<T: Clone>(&self, values: &[T]) -> Vec<T> {
        self.permutation.iter().map(|&p| values[p].clone()).collect()
    }

    /// Ordered index of a site with exactly these coordinates, if any.
    pub fn position_of(&self, loc: &Location) -> Option<usize> {
        self.sites.iter().position(|s| s == loc)
    }

    /// The `l` reference sites closest to a new location, ascending by distance.
    pub fn neighbors_of_new(&self, v0: &Location, l: usize) -> Result<Vec<usize>> {
        if l == 0 || l > self.len() {
            return Err(Error::invalid(format!(
                "requested {l} neighbors from a reference set of {}",
                self.len()
            )));
        }
        Ok(nearest_among(v0, &self.sites, l))
    }
}

fn check_distinct(locations: &[Location]) -> Result<()> {
    let mut idx: Vec<usize> = (0..locations.len()).collect();
    idx.sort_by(|&a, &b| {
        let (la, lb) = (locations[a], locations[b]);
        la.x.total_cmp(&lb.x).then(la.y.total_cmp(&lb.y))
    });
    for w in idx.windows(2) {
        if locations[w[0]] == locations[w[1]] {
            return Err(Error::data(format!(
                "duplicate location ({}, {}) at rows {} and {}",
                locations[w[0]].x,
                locations[w[0]].y,
                w[0].min(w[1]),
                w[0].max(w[1])
            )));
        }
    }
    Ok(())
}

/// Indices of the `k` closest candidates to `target`, ascending by
/// (distance, index). Exhaustive scan with a bounded insertion buffer.
fn nearest_among(target: &Location, candidates: &[Location], k: usize) -> Vec<usize> {
    let k = k.min(candidates.len());
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (j, c) in candidates.iter().enumerate() {
        let d = target.distance(c);
        if best.len() == k {
            if let Some(&(worst, _)) = best.last() {
                // Candidates arrive in index order, so an equal distance loses the tie.
                if d >= worst {
                    continue;
                }
            }
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, j));
        best.truncate(k);
    }
    best.into_iter().map(|(_, j)| j).collect()
}
