//! End-to-end acceptance checks, one test per criterion.
//!
//! Each test writes a single `acceptance criterion N: PASS|FAIL ...` line
//! straight to stderr so the summary survives output capture.

mod common;

use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use robust_gd::baselines::{self, GEOMED_MAX_ITER};
use robust_gd::bench::{read_results, run_experiment, ExperimentConfig, RunOptions};
use robust_gd::catoni::{self, ScalarSample, SmoothingParams};
use robust_gd::models::{finite_diff_check, LogisticTask, LossModel, QuadraticRiskTask};
use robust_gd::rgd::{self, Budget, RgdConfig, StepSchedule};
use robust_gd::synth::{self, NoiseSpec};
use robust_gd::{seeding, Result};

fn report(criterion: u8, passed: bool, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance criterion {criterion}: {verdict} {detail}");
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

const GRID_A: [f64; 9] = [-5.0, -2.0, -1.4, -0.5, 0.0, 0.5, 1.4, 2.0, 5.0];
const GRID_B: [f64; 5] = [0.01, 0.1, 0.5, 1.0, 3.0];

#[test]
fn criterion_01_closed_form_matches_quadrature() {
    let hermite = common::gauss_hermite(200);
    let legendre = common::gauss_legendre(200);
    let started = Instant::now();
    let closed: Vec<f64> = GRID_A
        .iter()
        .flat_map(|&a| GRID_B.iter().map(move |&b| catoni::smoothed_psi_expectation(a, b).unwrap()))
        .collect();
    let elapsed = started.elapsed().as_secs_f64();
    let mut worst_split = 0.0f64;
    let mut worst_hermite = (0.0f64, 0.0, 0.0);
    for (k, (a, b)) in GRID_A.iter().flat_map(|&a| GRID_B.iter().map(move |&b| (a, b))).enumerate() {
        worst_split = worst_split.max((closed[k] - common::expectation_split(&legendre, a, b)).abs());
        let gh = (closed[k] - common::expectation_hermite(&hermite, a, b)).abs();
        if gh > worst_hermite.0 {
            worst_hermite = (gh, a, b);
        }
    }
    let passed = worst_split <= 1e-8 && elapsed < 1.0;
    report(
        1,
        passed,
        &format!(
            "max |closed form - split 200-node Gauss-Legendre| = {worst_split:.2e} over 45 points in {elapsed:.4}s \
             (unsplit 200-node Gauss-Hermite differs by up to {:.2e} at a={}, b={})",
            worst_hermite.0, worst_hermite.1, worst_hermite.2
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_01_hermite_agrees_where_integrand_is_smooth() {
    // with b small enough that both kinks sit beyond 38 standard deviations
    // the integrand is a polynomial or constant over the rule's support
    let hermite = common::gauss_hermite(200);
    for a in [-5.0, -0.5, 0.0, 0.5, 5.0] {
        let b = 0.01;
        let gap = (catoni::smoothed_psi_expectation(a, b).unwrap() - common::expectation_hermite(&hermite, a, b)).abs();
        assert!(gap <= 1e-8, "a={a}: {gap:e}");
    }
}

#[test]
fn criterion_02_deviation_bound_coverage() {
    let (reps, n, delta, log_scale) = (2000, 500, 0.05, 1.75);
    let noise = NoiseSpec::lognormal(0.0, log_scale).unwrap();
    let v = noise.variance();
    let params = SmoothingParams::from_moment_bound(v, n, delta).unwrap();
    let bound = catoni::deviation_bound(v, n, delta).unwrap();
    let started = Instant::now();
    let mut rng = seeding::rng(20_240_501);
    let misses = (0..reps)
        .filter(|_| {
            let xs = noise.sample_with(n, &mut rng);
            catoni::smoothed_mean(&ScalarSample::new(xs).unwrap(), &params).abs() > bound
        })
        .count();
    let rate = misses as f64 / reps as f64;
    let elapsed = started.elapsed().as_secs_f64();
    let passed = rate <= 0.07 && elapsed < 60.0;
    report(2, passed, &format!("violation rate {rate:.4} ({misses}/{reps}), bound {bound:.3}, {elapsed:.2}s"));
    assert!(passed);
}

#[test]
fn criterion_03_lipschitz_in_l1() {
    let n = 50;
    let beta = catoni::default_noise_precision(0.05).unwrap();
    let factor = catoni::lipschitz_factor(beta).unwrap();
    let mut rng = seeding::rng(3);
    let mut violations = 0;
    let mut tightest = 0.0f64;
    for _ in 0..1000 {
        let spread = 10f64.powf(rng.random_range(-2.0..3.0));
        let s = 10f64.powf(rng.random_range(-1.0..2.0));
        let x: Vec<f64> = (0..n).map(|_| spread * rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = if rng.random_bool(0.5) {
            x.iter().map(|v| v + 0.1 * spread * rng.sample::<f64, _>(StandardNormal)).collect()
        } else {
            (0..n).map(|_| spread * rng.sample::<f64, _>(StandardNormal)).collect()
        };
        let params = SmoothingParams::new(0.05, s, beta).unwrap();
        let mx = catoni::smoothed_mean(&ScalarSample::new(x.clone()).unwrap(), &params);
        let my = catoni::smoothed_mean(&ScalarSample::new(y.clone()).unwrap(), &params);
        let l1: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
        let lhs = (mx - my).abs();
        let rhs = factor / n as f64 * l1;
        if lhs > rhs + 1e-10 {
            violations += 1;
        }
        tightest = tightest.max(lhs / rhs);
    }
    report(3, violations == 0, &format!("{violations} violations over 1000 pairs, largest ratio {tightest:.4}, c = {factor:.5}"));
    assert_eq!(violations, 0);
}

/// Quadratic with eigenvalues {1, 2.5, 4} in a rotated basis and `w* = 0`.
fn rotated_quadratic() -> QuadraticRiskTask {
    let theta: f64 = 0.7;
    let phi: f64 = -0.4;
    let (c1, s1, c2, s2) = (theta.cos(), theta.sin(), phi.cos(), phi.sin());
    let r1 = DMatrix::from_row_slice(3, 3, &[c1, -s1, 0.0, s1, c1, 0.0, 0.0, 0.0, 1.0]);
    let r2 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, c2, -s2, 0.0, s2, c2]);
    let q = r1 * r2;
    let sigma = &q * DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.5, 4.0])) * q.transpose();
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    QuadraticRiskTask::population(sigma, vec![0.0; 3]).unwrap()
}

#[test]
fn criterion_04_oracle_contraction() {
    let task = rotated_quadratic();
    let (mu, big) = task.curvature();
    assert!((mu - 1.0).abs() < 1e-12 && (big - 4.0).abs() < 1e-12);
    let w0 = [4.0, 3.0, -6.0];
    let d0 = l2(&w0, task.w_star());
    let mut lines = Vec::new();
    let mut passed = true;
    for alpha in [0.1, 0.5, 0.9] {
        let sched = StepSchedule::fixed(alpha, task.lambda_bar()).unwrap();
        let traj = rgd::oracle_run(&task, &sched, 200, None, &w0).unwrap();
        let first_bad = traj
            .iterates
            .iter()
            .enumerate()
            .find(|(t, w)| l2(w, task.w_star()) > (1.0 - alpha).powf(*t as f64 / 2.0) * d0);
        passed &= first_bad.is_none();
        lines.push(match first_bad {
            None => format!("alpha {alpha}: holds for T <= 200"),
            Some((t, w)) => format!(
                "alpha {alpha}: fails at T = {t} ({:.3e} > {:.3e}; step {:.4} exceeds 2/(mu+Lambda) = 0.4)",
                l2(w, task.w_star()),
                (1.0 - alpha).powf(t as f64 / 2.0) * d0,
                rgd::step_size(&sched, 0)
            ),
        });
    }
    let sched = StepSchedule::decaying(task.lambda_bar()).unwrap();
    let traj = rgd::oracle_run(&task, &sched, 200, None, &w0).unwrap();
    // T = 0 would demand ‖ŵ₀ − w*‖ ≤ ‖ŵ₀ − w*‖/√2
    let worst_decay = traj
        .iterates
        .iter()
        .enumerate()
        .skip(1)
        .map(|(t, w)| l2(w, task.w_star()) * ((t + 2) as f64).sqrt() / d0)
        .fold(0.0, f64::max);
    passed &= worst_decay <= 1.0;
    lines.push(format!("decaying: worst ratio {worst_decay:.4} over 1 <= T <= 200"));
    report(4, passed, &lines.join("; "));
    assert!(passed, "{}", lines.join("\n"));
}

fn comparison_config(noise: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{
            "trials": 50,
            "task": {{"kind": "controlled", "n": 500, "d": 2, "iterations": 250, "alpha": 0.1, "noise": {noise}}},
            "methods": [{{"method": "erm"}}, {{"method": "rgdmult"}}]
        }}"#
    ))
    .unwrap()
}

fn final_risks(dir: &Path, method: &str) -> Vec<f64> {
    read_results(&dir.join("results.csv"))
        .unwrap()
        .into_iter()
        .filter(|r| r.method == method)
        .map(|r| r.final_metrics().unwrap().excess_true_risk.unwrap())
        .collect()
}

#[test]
fn criterion_05_heavy_tail_advantage() {
    let started = Instant::now();
    let mut summary = Vec::new();
    let mut passed = true;
    for (name, noise) in [
        ("normal", r#"{"kind": "normal", "sd": 20.0}"#),
        ("lognormal", r#"{"kind": "lognormal", "log_location": 0.0, "log_scale": 1.75}"#),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            out_dir: dir.path().to_path_buf(),
            seed: 2,
            threads: 0,
        };
        let run = run_experiment(&comparison_config(noise), &opts).unwrap();
        assert!(run.failures.is_empty(), "{:?}", run.failures);
        let erm = final_risks(dir.path(), "erm");
        let robust = final_risks(dir.path(), "rgdmult");
        let ratio = common::median(&robust) / common::median(&erm);
        let (var_erm, var_robust) = (common::variance(&erm), common::variance(&robust));
        let ok = if name == "normal" {
            ratio <= 1.25
        } else {
            ratio <= 0.5 && var_robust < var_erm
        };
        passed &= ok;
        summary.push(format!("{name}: median ratio {ratio:.3}, variance {var_robust:.3e} vs {var_erm:.3e}"));
    }
    let elapsed = started.elapsed().as_secs_f64();
    passed &= elapsed < 300.0;
    report(5, passed, &format!("{} ({elapsed:.1}s)", summary.join("; ")));
    assert!(passed);
}

#[test]
fn criterion_06_gradients_match_finite_differences() {
    let mut rng = seeding::rng(6);
    let noise = NoiseSpec::normal(3.0).unwrap();
    let quad = synth::gen_noisy_quadratic(40, 4, &noise, 1).unwrap();
    let (reg, _) = synth::gen_regression(40, 5, &noise, 10, 2).unwrap();
    let (features, classes, n) = (4, 3, 40);
    let x: Vec<f64> = (0..n * features).map(|_| rng.random_range(0.0..=1.0)).collect();
    let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    let logit = LogisticTask::new(x, y, features, classes, 0.01).unwrap();
    let models: [(&str, &dyn LossModel); 3] = [("quadratic", &quad), ("regression", &reg), ("logistic", &logit)];
    let mut worst = Vec::new();
    let mut passed = true;
    for (name, model) in models {
        let mut model_worst = 0.0f64;
        for _ in 0..100 {
            let w: Vec<f64> = (0..model.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let i = rng.random_range(0..model.num_examples());
            let report = finite_diff_check(
                |w| model.loss(w, i),
                |w| {
                    let mut g = vec![0.0; model.dim()];
                    model.grad_into(w, i, &mut g);
                    g
                },
                &w,
                1e-6,
            );
            passed &= report.passed;
            model_worst = model_worst.max(report.max_rel_error);
        }
        worst.push(format!("{name} {model_worst:.2e}"));
    }
    report(6, passed, &format!("max relative error over 100 points: {}", worst.join(", ")));
    assert!(passed);
}

#[test]
fn criterion_07_geometric_median() {
    let mut rng = seeding::rng(7);
    let mut worst_gap = 0.0f64;
    for _ in 0..20 {
        let pts: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)]).collect();
        let m = baselines::geometric_median(&pts).unwrap();
        let grid = common::grid_median(&pts, 1e-5);
        worst_gap = worst_gap.max(l2(&m, &grid));
    }
    let mut worst_residual = 0.0f64;
    for _ in 0..50 {
        let k = rng.random_range(3..15);
        let pts: Vec<Vec<f64>> = (0..k).map(|_| (0..3).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
        let m = baselines::weiszfeld(&pts, 1e-9, GEOMED_MAX_ITER).unwrap();
        if m.multiplicity == 0 {
            worst_residual = worst_residual.max(m.residual);
        }
    }
    let passed = worst_gap <= 1e-3 && worst_residual <= 1e-6;
    report(
        7,
        passed,
        &format!("max distance to grid search {worst_gap:.2e} on 20 planar instances; max residual {worst_residual:.2e}"),
    );
    assert!(passed);
}

#[test]
fn criterion_08_update_variance_diagnostic() {
    let (n, d, sd, reps) = (500, 2, 20.0, 500);
    let noise = NoiseSpec::normal(sd).unwrap();
    let offset = [1.0, -1.0];
    // per-coordinate E g_j² for Gaussian inputs: σ² + ‖Δ‖² + 2Δ_j²
    let delta_sq: f64 = offset.iter().map(|v| v * v).sum();
    let v_max = offset.iter().map(|o| sd * sd + delta_sq + 2.0 * o * o).fold(0.0, f64::max);
    let mut mean_sq = 0.0;
    let mut step = 0.0;
    for r in 0..reps {
        let task = synth::gen_noisy_quadratic(n, d, &noise, 10_000 + r).unwrap();
        let w: Vec<f64> = task.w_star().iter().zip(offset).map(|(a, b)| a + b).collect();
        let config = RgdConfig::new(0.005, StepSchedule::fixed(0.1, task.lambda_bar()).unwrap(), Budget::iterations(1));
        let traj = rgd::rgd_run(&task, &config, &w).unwrap();
        step = traj.steps[0].step_size;
        mean_sq += l2(&traj.iterates[1], &traj.iterates[0]).powi(2) / reps as f64;
    }
    let bound = rgd::update_variance_bound(n, d, step, v_max, delta_sq.sqrt()).unwrap();
    let passed = mean_sq <= bound;
    report(8, passed, &format!("mean squared update {mean_sq:.5} vs bound {bound:.5} (step {step}, V = {v_max})"));
    assert!(passed);
}

fn run_controlled(config: &Path, out: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_rgd-bench"))
        .args(["controlled", "--seed", "11", "--threads", "3", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(out.join("results.csv")).unwrap()
}

#[test]
fn criterion_09_controlled_is_byte_identical() -> Result<()> {
    let dir = tempfile::tempdir()?;
    let config = dir.path().join("controlled.json");
    std::fs::write(
        &config,
        r#"{
            "trials": 4,
            "task": {"kind": "controlled", "n": 120, "d": 3, "iterations": 30,
                     "noise": {"family": "lognormal", "level": 9}},
            "methods": [{"method": "oracle"}, {"method": "erm"}, {"method": "rgdmult"},
                        {"method": "mom", "k": 6}, {"method": "sgd"}, {"method": "svrg"}]
        }"#,
    )?;
    let first = run_controlled(&config, &dir.path().join("a"));
    let second = run_controlled(&config, &dir.path().join("b"));
    let passed = first == second && !first.is_empty();
    report(9, passed, &format!("two runs produced {} and {} bytes, identical: {}", first.len(), second.len(), first == second));
    assert!(passed);
    Ok(())
}

#[test]
fn criterion_10_asymptotic_claims_are_informational() {
    report(10, true, "informational; rates are exercised through criteria 2, 4 and 5");
}
