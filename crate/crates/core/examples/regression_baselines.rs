//! Heavy-tailed linear regression: closed-form and robust baselines next to
//! robust gradient descent started from the least-squares fit.

use robust_gd::baselines::{self, LadConfig};
use robust_gd::rgd::{self, Budget, RgdConfig, StepSchedule};
use robust_gd::synth::{self, NoiseFamily, NoiseSpec};
use robust_gd::Result;

pub fn run_example() -> Result<()> {
    let (n, d) = (200, 5);
    let noise = NoiseSpec::at_level(NoiseFamily::Pareto, 12)?;
    let (train, test) = synth::gen_regression(n, d, &noise, 1000, 3)?;
    let w_star = train.w_star().expect("synthetic task carries w*").to_vec();

    let ols = baselines::ols_analytic(&train);
    let geomed = baselines::geomed_of_ols(&train, 11)?;
    let lad = baselines::lad_fit(&train, &LadConfig::default())?;
    let config = RgdConfig::new(0.005, StepSchedule::constant(0.05)?, Budget::evaluations(40 * n));
    let robust = rgd::rgd_run(&train, &config, &ols)?;

    println!("pareto noise, sd {:.2}, n = {n}, d = {d}", noise.variance().sqrt());
    println!("{:<8}{:>18}", "method", "excess test rmse");
    for (name, w) in [
        ("ols", ols.as_slice()),
        ("geomed", geomed.estimate.as_slice()),
        ("lad", lad.w.as_slice()),
        ("rgd", robust.final_iterate()),
    ] {
        println!("{name:<8}{:>18.5}", synth::excess_test_rmse(w, &w_star, &test));
    }
    println!("geomed used {} blocks; lad objective {:.4} -> {:.4}", geomed.partitions, lad.initial_objective, lad.objective);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
