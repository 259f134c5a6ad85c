//! Mixture weights of one site's nearest neighbors as the kernel range
//! changes: a short range puts almost all weight on the closest neighbor.
//!
//! cargo run --release --example mixture_weights

use discrete_nnmp::geom::Location;
use discrete_nnmp::weights::{cutoffs, mixture_weights, WeightParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let site = Location::new(0.5, 0.5);
    let neighbors: Vec<Location> = [(0.52, 0.5), (0.45, 0.48), (0.5, 0.6), (0.35, 0.4), (0.7, 0.7)]
        .iter()
        .map(|&(x, y)| Location::new(x, y))
        .collect();
    let d: Vec<String> = neighbors.iter().map(|n| format!("{:.3}", site.distance(n))).collect();
    println!("neighbor distances: {}", d.join(" "));
    for zeta in [0.01, 0.05, 0.1, 0.3, 1.0] {
        let params = WeightParams::new([-1.5, 0.0, 0.0], 1.0, zeta)?;
        let w = mixture_weights(&cutoffs(&site, &neighbors, zeta)?, &params, &site);
        let w: Vec<String> = w.iter().map(|v| format!("{v:.3}")).collect();
        println!("zeta {zeta:5}: {}", w.join(" "));
    }
    Ok(())
}
