//! Generate the two synthetic fields and compare their count frequencies
//! with the Poisson(5) marginal the skew field is built to have.
//!
//! cargo run --release --example simulate_fields -- [seed]

use discrete_nnmp::marginal::CountDist;
use discrete_nnmp::simulate::{sglmm_dataset, skew_field_dataset, SglmmConfig, SkewFieldConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(1), |s| s.parse())?;
    let g = CountDist::poisson(5.0)?;
    println!("count  poisson(5)  sigma1=0  sigma1=3  sigma1=10");
    let fields: Vec<Vec<u64>> = [0.0, 3.0, 10.0]
        .iter()
        .map(|&sigma1| {
            skew_field_dataset(&SkewFieldConfig {
                sigma1,
                seed,
                ..Default::default()
            })
            .map(|d| d.counts)
        })
        .collect::<Result<_, _>>()?;
    for y in 0..=12u64 {
        let freq: Vec<String> = fields
            .iter()
            .map(|c| format!("{:8.3}", c.iter().filter(|&&v| v == y).count() as f64 / c.len() as f64))
            .collect();
        println!("{y:5}  {:10.3}  {}", g.pmf(y), freq.join("  "));
    }

    let d = sglmm_dataset(&SglmmConfig {
        seed,
        ..Default::default()
    })?;
    let mean = |f: &dyn Fn(f64, f64) -> bool| {
        let v: Vec<f64> = d
            .locations
            .iter()
            .zip(&d.counts)
            .filter(|(l, _)| f(l.x, l.y))
            .map(|(_, &c)| c as f64)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    println!("\nSGLMM field, mean count by quadrant (trend beta = (1.5, 1, 2)):");
    println!(
        "  x<.5 y>.5: {:6.2}   x>.5 y>.5: {:6.2}",
        mean(&|x, y| x < 0.5 && y > 0.5),
        mean(&|x, y| x > 0.5 && y > 0.5)
    );
    println!(
        "  x<.5 y<.5: {:6.2}   x>.5 y<.5: {:6.2}",
        mean(&|x, y| x < 0.5 && y < 0.5),
        mean(&|x, y| x > 0.5 && y < 0.5)
    );
    Ok(())
}
