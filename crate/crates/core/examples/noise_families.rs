//! The six calibrated noise families: every level has mean zero and a
//! standard deviation on a common grid.

use robust_gd::synth::{self, NoiseFamily, NoiseSpec, NUM_LEVELS};
use robust_gd::Result;

pub fn run_example() -> Result<()> {
    let n = 20_000;
    println!("{:<22}{:>6}{:>10}{:>12}{:>12}", "family", "level", "target", "mean", "sd");
    for family in NoiseFamily::ALL {
        for level in [1, 8, NUM_LEVELS] {
            let spec = NoiseSpec::at_level(family, level)?;
            let xs = synth::sample_noise(&spec, n, 42);
            let mean = xs.iter().sum::<f64>() / n as f64;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            println!("{:<22}{level:>6}{:>10.3}{mean:>12.4}{sd:>12.3}", format!("{family:?}"), synth::level_sd(level)?);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
