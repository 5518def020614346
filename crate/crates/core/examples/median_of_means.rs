//! Geometric medians and median-of-means gradients.

use robust_gd::baselines::{self, PartitionScheme};
use robust_gd::rgd::{Budget, GdConfig, GradientMatrix, StepSchedule};
use robust_gd::synth::{self, NoiseSpec};
use robust_gd::Result;

pub fn run_example() -> Result<()> {
    // four corners of a square and one far outlier
    let points = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![50.0, -40.0]];
    let m = baselines::weiszfeld(&points, 1e-10, baselines::GEOMED_MAX_ITER)?;
    println!("geometric median {:.4?} after {} iterations (residual {:.1e})", m.point, m.iterations, m.residual);

    // a majority point is its own median
    let stacked = vec![vec![2.0, 2.0], vec![2.0, 2.0], vec![2.0, 2.0], vec![9.0, 0.0], vec![-3.0, 5.0]];
    println!("stacked median {:?}", baselines::geometric_median(&stacked)?);

    let grads = GradientMatrix::from_rows(&[
        vec![1.0, 1.0],
        vec![1.2, 0.9],
        vec![0.8, 1.1],
        vec![1.1, 1.0],
        vec![900.0, -700.0],
        vec![0.9, 1.0],
    ])?;
    let partition = PartitionScheme::seeded(grads.num_rows(), 3, 1)?;
    println!("blocks {:?}", partition.blocks());
    println!("sample mean {:.3?}", grads.mean());
    println!("median of means {:.3?}", baselines::mom_gradient_with(&grads, &partition)?);

    let task = synth::gen_noisy_quadratic(300, 3, &NoiseSpec::lognormal(0.0, 1.75)?, 5)?;
    let config = GdConfig::new(StepSchedule::fixed(0.1, task.lambda_bar())?, Budget::iterations(60));
    let traj = baselines::mom_gd_run(&task, 10, &config, &[0.0; 3])?;
    println!("mom-gd excess risk {:.3e} -> {:.3e}", task.excess_risk(&traj.iterates[0]), task.excess_risk(traj.final_iterate()));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
