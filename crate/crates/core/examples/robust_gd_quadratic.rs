//! Robust gradient descent against plain gradient descent on a noisy
//! quadratic whose excess risk is known exactly.

use robust_gd::baselines::erm_gd_run;
use robust_gd::rgd::{self, Budget, RgdConfig, StepSchedule};
use robust_gd::synth::{self, NoiseFamily, NoiseSpec};
use robust_gd::Result;

fn final_excess(task: &robust_gd::models::QuadraticRiskTask, traj: &rgd::Trajectory) -> f64 {
    task.excess_risk(traj.final_iterate())
}

pub fn run_example() -> Result<()> {
    let (n, d, iterations) = (500, 2, 100);
    for noise in [NoiseSpec::normal(20.0)?, NoiseSpec::lognormal(0.0, 1.75)?] {
        let (mut erm, mut robust) = (Vec::new(), Vec::new());
        for trial in 0..10u64 {
            let task = synth::gen_noisy_quadratic(n, d, &noise, trial)?;
            let w0 = rgd::init_around(task.w_star(), 5.0, trial + 100);
            let schedule = StepSchedule::fixed(0.1, task.lambda_bar())?;
            let config = RgdConfig::new(0.005, schedule, Budget::iterations(iterations));
            robust.push(final_excess(&task, &rgd::rgd_run(&task, &config, &w0)?));
            erm.push(final_excess(&task, &erm_gd_run(&task, &config.gd_config(), &w0)?));
        }
        let median = |v: &mut Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        let name = match noise.family {
            NoiseFamily::Normal => "normal(sd 20)",
            _ => "lognormal(0, 1.75)",
        };
        println!("{name:<20} median excess risk: erm {:.4e}  rgd {:.4e}", median(&mut erm), median(&mut robust));
    }

    // exact gradients contract at rate (1 - alpha)^(t/2)
    let task = synth::gen_noisy_quadratic(50, 3, &NoiseSpec::normal(1.0)?, 1)?;
    let sched = StepSchedule::fixed(0.5, task.lambda_bar())?;
    let traj = rgd::oracle_run(&task, &sched, 20, None, &[3.0, 3.0, 3.0])?;
    let dist: f64 = traj.final_iterate().iter().zip(task.w_star()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    println!("oracle distance after 20 steps: {dist:.3e}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
