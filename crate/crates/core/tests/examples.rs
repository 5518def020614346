//! Every example runs to completion.

#[path = "../examples/catoni_mean.rs"]
mod catoni_mean;

#[test]
fn catoni_mean_runs() {
    catoni_mean::run_example().expect("catoni_mean example should run");
}

#[path = "../examples/robust_gd_quadratic.rs"]
mod robust_gd_quadratic;

#[test]
fn robust_gd_quadratic_runs() {
    robust_gd_quadratic::run_example().expect("robust_gd_quadratic example should run");
}

#[path = "../examples/regression_baselines.rs"]
mod regression_baselines;

#[test]
fn regression_baselines_runs() {
    regression_baselines::run_example().expect("regression_baselines example should run");
}

#[path = "../examples/median_of_means.rs"]
mod median_of_means;

#[test]
fn median_of_means_runs() {
    median_of_means::run_example().expect("median_of_means example should run");
}

#[path = "../examples/noise_families.rs"]
mod noise_families;

#[test]
fn noise_families_runs() {
    noise_families::run_example().expect("noise_families example should run");
}

#[path = "../examples/logistic_minibatch.rs"]
mod logistic_minibatch;

#[test]
fn logistic_minibatch_runs() {
    logistic_minibatch::run_example().expect("logistic_minibatch example should run");
}

#[path = "../examples/experiment_harness.rs"]
mod experiment_harness;

#[test]
fn experiment_harness_runs() {
    experiment_harness::run_example().expect("experiment_harness example should run");
}
