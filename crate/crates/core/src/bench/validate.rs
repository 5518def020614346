//! Self-check suite over the library's invariants.
//!
//! Each check is a small deterministic experiment with a fixed seed. The
//! closed-form check takes the function under test as an argument so a
//! deliberately broken implementation can be shown to fail.

use std::f64::consts::SQRT_2;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::Serialize;

use crate::baselines::{self, mom_gradient_with, weiszfeld, PartitionScheme, StochasticConfig};
use crate::catoni::{self, ScalarSample, SmoothingParams};
use crate::models::{finite_diff_check, LogisticTask, LossModel, QuadraticRiskTask, RegressionTask, TrueRisk};
use crate::quadrature::GaussLegendre;
use crate::rgd::{self, distance, Ball, Budget, GradientMatrix, RgdConfig, StepSchedule};
use crate::seeding::{self, Rng};
use crate::synth::{self, NoiseFamily, NoiseSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

type CheckFn = fn() -> (bool, String);

/// Names and bodies of every check, in report order.
pub const CHECKS: &[(&str, CheckFn)] = &[
    ("catoni.closed_form_matches_quadrature", || closed_form_check(catoni_expectation)),
    ("catoni.expectation_is_odd", expectation_is_odd),
    ("catoni.smoothed_mean_is_bounded", smoothed_mean_is_bounded),
    ("catoni.smoothed_mean_is_l1_lipschitz", smoothed_mean_is_lipschitz),
    ("catoni.deviation_bound_coverage", deviation_bound_coverage),
    ("rgd.oracle_contraction_fixed_step", oracle_contraction),
    ("rgd.oracle_contraction_alpha_0_9", oracle_contraction_large_alpha),
    ("rgd.oracle_decay_decaying_step", oracle_decay),
    ("rgd.projection_stays_in_ball", projection_stays_in_ball),
    ("rgd.runs_are_deterministic", rgd_deterministic),
    ("rgd.full_coordinate_subset_is_full_update", coordinate_subset_reduces),
    ("models.gradients_match_finite_differences", gradients_match_finite_differences),
    ("models.quadratic_excess_risk_identity", quadratic_excess_identity),
    ("models.logistic_loss_is_convex", logistic_convexity),
    ("baselines.weiszfeld_first_order_residual", weiszfeld_residual),
    ("baselines.mom_is_permutation_invariant", mom_permutation_invariant),
    ("baselines.stochastic_runs_are_deterministic", baselines_deterministic),
    ("synth.noise_is_centered", noise_is_centered),
    ("synth.level_sd_is_monotone", level_sd_is_monotone),
    ("synth.generators_are_pure", generators_are_pure),
];

pub fn run_validation_suite() -> ValidationReport {
    let checks = CHECKS
        .iter()
        .map(|(name, f)| {
            let clock = Instant::now();
            let (passed, detail) = f();
            Check {
                name,
                passed,
                detail,
                seconds: clock.elapsed().as_secs_f64(),
            }
        })
        .collect();
    ValidationReport { checks }
}

fn catoni_expectation(a: f64, b: f64) -> f64 {
    catoni::smoothed_psi_expectation(a, b).expect("positive scale")
}

pub const GRID_A: [f64; 9] = [-5.0, -2.0, -1.4, -0.5, 0.0, 0.5, 1.4, 2.0, 5.0];
pub const GRID_B: [f64; 5] = [0.01, 0.1, 0.5, 1.0, 3.0];
pub const CLOSED_FORM_TOL: f64 = 1e-8;

/// `E ψ(a + bZ)` by Gauss–Legendre panels over `z ∈ [−40, 40]`, with panel
/// edges at the two kinks of ψ so every panel integrates a smooth function.
pub fn quadrature_expectation(a: f64, b: f64) -> f64 {
    let rule = GaussLegendre::new(40);
    let mut edges = vec![-40.0, 40.0];
    for kink in [(-SQRT_2 - a) / b, (SQRT_2 - a) / b] {
        if kink > -40.0 && kink < 40.0 {
            edges.push(kink);
        }
    }
    edges.sort_by(f64::total_cmp);
    let f = |z: f64| catoni::truncate(a + b * z) * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    edges
        .windows(2)
        .map(|w| {
            let pieces = ((w[1] - w[0]) / 2.0).ceil().max(1.0) as usize;
            let h = (w[1] - w[0]) / pieces as f64;
            (0..pieces)
                .map(|k| rule.integrate(w[0] + k as f64 * h, w[0] + (k + 1) as f64 * h, f))
                .sum::<f64>()
        })
        .sum()
}

/// Largest `|f(a, b) − quadrature|` over the 45-point grid, and whether it
/// is within `1e-8`.
pub fn closed_form_check(f: impl Fn(f64, f64) -> f64) -> (bool, String) {
    let mut worst = (0.0f64, 0.0, 0.0);
    for a in GRID_A {
        for b in GRID_B {
            let err = (f(a, b) - quadrature_expectation(a, b)).abs();
            if err.is_nan() || err > worst.0 {
                worst = (err, a, b);
            }
        }
    }
    (
        worst.0 <= CLOSED_FORM_TOL,
        format!("max error {:.2e} at a={}, b={}", worst.0, worst.1, worst.2),
    )
}

fn expectation_is_odd() -> (bool, String) {
    let mut rng = seeding::rng(11);
    let worst = (0..2000)
        .map(|_| {
            let a = rng.random_range(-30.0..30.0);
            let b = rng.random_range(1e-3..50.0);
            (catoni_expectation(a, b) + catoni_expectation(-a, b)).abs()
        })
        .fold(0.0, f64::max);
    (worst == 0.0, format!("max |E(a)+E(-a)| = {worst:.1e}"))
}

fn lognormal_sample(rng: &mut Rng, n: usize, sigma: f64) -> Vec<f64> {
    let dist = LogNormal::new(0.0, sigma).expect("valid");
    (0..n).map(|_| dist.sample(rng)).collect()
}

fn smoothed_mean_is_bounded() -> (bool, String) {
    let mut rng = seeding::rng(12);
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let xs: Vec<f64> = lognormal_sample(&mut rng, 40, 2.5).into_iter().map(|x| x * 1e3).collect();
        let s = rng.random_range(0.1..20.0);
        let p = SmoothingParams::new(0.05, s, rng.random_range(0.5..8.0)).expect("valid");
        let m = catoni::smoothed_mean(&ScalarSample::new(xs).expect("finite"), &p);
        worst = worst.max(m.abs() / (s * catoni::PSI_BOUND));
    }
    (worst <= 1.0, format!("max |mean|/(s·2√2/3) = {worst:.6}"))
}

/// Violations of `|x̂(x) − x̂(x')| ≤ (c_ρ/n)·‖x − x'‖₁` beyond `slack`, over
/// `pairs` random sample pairs of size `n`.
pub fn lipschitz_violations(pairs: usize, n: usize, slack: f64, seed: u64) -> usize {
    let mut rng = seeding::rng(seed);
    let delta = 0.05;
    let beta = catoni::default_noise_precision(delta).expect("valid");
    let c_rho = catoni::lipschitz_factor(beta).expect("valid");
    (0..pairs)
        .filter(|k| {
            let scale = 10f64.powf(rng.random_range(-1.0..2.0));
            let x: Vec<f64> = (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
            let x2: Vec<f64> = if k % 2 == 0 {
                x.iter().map(|v| v + 0.3 * scale * rng.sample::<f64, _>(StandardNormal)).collect()
            } else {
                (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
            };
            let s = rng.random_range(0.2..5.0) * scale;
            let p = SmoothingParams::new(delta, s, beta).expect("valid");
            let m1 = catoni::smoothed_mean(&ScalarSample::new(x.clone()).expect("finite"), &p);
            let m2 = catoni::smoothed_mean(&ScalarSample::new(x2.clone()).expect("finite"), &p);
            let l1: f64 = x.iter().zip(&x2).map(|(a, b)| (a - b).abs()).sum();
            (m1 - m2).abs() > c_rho / n as f64 * l1 + slack
        })
        .count()
}

fn smoothed_mean_is_lipschitz() -> (bool, String) {
    let v = lipschitz_violations(1000, 50, 1e-10, 13);
    (v == 0, format!("{v} violations over 1000 pairs"))
}

/// Fraction of `reps` replications where the smoothed mean of `n` centered
/// log-normal draws (log-scale `sigma`) misses the mean by more than the
/// deviation bound at confidence `delta`, with `v` the true second moment.
pub fn deviation_violation_rate(reps: usize, n: usize, sigma: f64, delta: f64, seed: u64) -> f64 {
    let mut rng = seeding::rng(seed);
    let s2 = sigma * sigma;
    let v = (s2.exp() - 1.0) * s2.exp();
    let mean = (0.5 * s2).exp();
    let params = SmoothingParams::from_moment_bound(v, n, delta).expect("valid");
    let bound = catoni::deviation_bound(v, n, delta).expect("valid");
    let misses = (0..reps)
        .filter(|_| {
            let xs: Vec<f64> = lognormal_sample(&mut rng, n, sigma).into_iter().map(|x| x - mean).collect();
            catoni::smoothed_mean(&ScalarSample::new(xs).expect("finite"), &params).abs() > bound
        })
        .count();
    misses as f64 / reps as f64
}

fn deviation_bound_coverage() -> (bool, String) {
    let rate = deviation_violation_rate(400, 500, 1.75, 0.05, 14);
    (rate <= 0.07, format!("violation rate {rate:.4} over 400 replications"))
}

fn diag_quadratic(w_star: Vec<f64>) -> QuadraticRiskTask {
    let d = w_star.len();
    let diag: Vec<f64> = (0..d).map(|j| 1.0 + 3.0 * j as f64 / (d - 1).max(1) as f64).collect();
    let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
    QuadraticRiskTask::population(sigma, w_star).expect("positive definite")
}

/// Centered at `w* = 0` so that iterates shrink multiplicatively and the
/// comparison stays exact far below machine epsilon.
fn centered_quadratic() -> QuadraticRiskTask {
    diag_quadratic(vec![0.0; 3])
}

const ORACLE_START: [f64; 3] = [4.0, 3.0, -6.0];

/// Worst ratio `‖ŵ_t − w*‖ / ((1−α)^(t/2)‖ŵ₀ − w*‖)` over `t ≤ steps` for
/// exact-gradient descent on a quadratic with `μ = 1`, `Λ = 4`.
pub fn oracle_contraction_ratio(alpha: f64, steps: usize) -> f64 {
    let task = centered_quadratic();
    let sched = StepSchedule::fixed(alpha, task.lambda_bar()).expect("valid");
    let traj = rgd::oracle_run(&task, &sched, steps, None, &ORACLE_START).expect("valid");
    let d0 = distance(&ORACLE_START, task.minimizer());
    traj.iterates
        .iter()
        .enumerate()
        .map(|(t, w)| distance(w, task.minimizer()) / ((1.0 - alpha).powf(t as f64 / 2.0) * d0))
        .fold(0.0, f64::max)
}

fn oracle_contraction() -> (bool, String) {
    let ratios: Vec<f64> = [0.1, 0.5].iter().map(|&a| oracle_contraction_ratio(a, 200)).collect();
    (ratios.iter().all(|r| *r <= 1.0), format!("worst ratios {:.4} {:.4} (alpha 0.1, 0.5)", ratios[0], ratios[1]))
}

/// With `μ = 1`, `Λ = 4` the step `0.9/λ̄` exceeds `2/(μ + Λ)` and the
/// iteration diverges along the top eigenvector.
fn oracle_contraction_large_alpha() -> (bool, String) {
    let r = oracle_contraction_ratio(0.9, 200);
    (r <= 1.0, format!("worst ratio {r:.3e} (alpha 0.9)"))
}

/// Worst ratio `‖ŵ_t − w*‖·√(t+2) / ‖ŵ₀ − w*‖` for `1 ≤ t ≤ steps` under
/// the decaying schedule. At `t = 0` the ratio is `√2` by construction.
pub fn oracle_decay_ratio(steps: usize) -> f64 {
    let task = centered_quadratic();
    let sched = StepSchedule::decaying(task.lambda_bar()).expect("valid");
    let traj = rgd::oracle_run(&task, &sched, steps, None, &ORACLE_START).expect("valid");
    let d0 = distance(&ORACLE_START, task.minimizer());
    traj.iterates
        .iter()
        .enumerate()
        .skip(1)
        .map(|(t, w)| distance(w, task.minimizer()) * ((t + 2) as f64).sqrt() / d0)
        .fold(0.0, f64::max)
}

fn oracle_decay() -> (bool, String) {
    let r = oracle_decay_ratio(200);
    (r <= 1.0, format!("worst ratio {r:.4} over 1 <= t <= 200"))
}

fn projection_stays_in_ball() -> (bool, String) {
    let mut rng = seeding::rng(15);
    let mut bad = 0;
    for _ in 0..2000 {
        let d = rng.random_range(1..6);
        let center: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let ball = Ball::new(center.clone(), rng.random_range(0.01..3.0)).expect("valid");
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-20.0..20.0)).collect();
        let p = ball.project(&w);
        let inside = ball.project(&center.iter().map(|c| c + rng.random_range(-0.001..0.001)).collect::<Vec<_>>());
        if !ball.contains(&p) || ball.project(&p) != p || distance(&p, &inside) > distance(&w, &inside) + 1e-12 {
            bad += 1;
        }
    }
    (bad == 0, format!("{bad} failures over 2000 projections"))
}

fn small_quadratic(seed: u64) -> QuadraticRiskTask {
    let noise = NoiseSpec::at_level(NoiseFamily::Lognormal, 10).expect("valid");
    synth::gen_noisy_quadratic(100, 3, &noise, seed).expect("valid")
}

fn rgd_config(seed: u64) -> RgdConfig {
    let mut cfg = RgdConfig::new(0.01, StepSchedule::fixed(0.1, 1.0).expect("valid"), Budget::iterations(30));
    cfg.seed = seed;
    cfg
}

fn rgd_deterministic() -> (bool, String) {
    let task = small_quadratic(1);
    let mut cfg = rgd_config(7);
    cfg.minibatch = Some(20);
    cfg.coord_subset = Some(2);
    let a = rgd::rgd_run(&task, &cfg, &[0.0; 3]).expect("valid");
    let b = rgd::rgd_run(&task, &cfg, &[0.0; 3]).expect("valid");
    (a == b, format!("{} iterates compared bitwise", a.iterates.len()))
}

fn coordinate_subset_reduces() -> (bool, String) {
    let task = small_quadratic(2);
    let full = rgd::rgd_run(&task, &rgd_config(3), &[0.0; 3]).expect("valid");
    let mut cfg = rgd_config(3);
    cfg.coord_subset = Some(3);
    let subset = rgd::rgd_run(&task, &cfg, &[0.0; 3]).expect("valid");
    cfg.coord_subset = Some(10);
    let larger = rgd::rgd_run(&task, &cfg, &[0.0; 3]).expect("valid");
    (full == subset && full == larger, "m = d and m > d compared bitwise".into())
}

fn random_point(rng: &mut Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Worst finite-difference relative error for each model over `points`
/// random parameters: (quadratic, regression, logistic).
pub fn finite_difference_errors(points: usize, seed: u64) -> [f64; 3] {
    let mut rng = seeding::rng(seed);
    let noise = NoiseSpec::normal(2.0).expect("valid");
    let quad = synth::gen_noisy_quadratic(30, 4, &noise, seed).expect("valid");
    let (reg, _) = synth::gen_regression(30, 4, &noise, 5, seed).expect("valid");
    let (f, c, n) = (3, 4, 30);
    let feats: Vec<f64> = (0..n * f).map(|_| rng.random_range(0.0..=1.0)).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let logit = LogisticTask::new(feats, labels, f, c, 0.01).expect("valid");
    let models: [&dyn LossModel; 3] = [&quad, &reg, &logit];
    let mut worst = [0.0f64; 3];
    for _ in 0..points {
        for (k, m) in models.iter().enumerate() {
            let w = random_point(&mut rng, m.dim(), 2.0);
            let i = rng.random_range(0..m.num_examples());
            let report = finite_diff_check(
                |w| m.loss(w, i),
                |w| {
                    let mut g = vec![0.0; m.dim()];
                    m.grad_into(w, i, &mut g);
                    g
                },
                &w,
                1e-6,
            );
            worst[k] = worst[k].max(report.max_rel_error);
        }
    }
    worst
}

fn gradients_match_finite_differences() -> (bool, String) {
    let worst = finite_difference_errors(100, 16);
    (worst.iter().all(|e| *e <= 1e-6), format!("max relative errors {:.2e} {:.2e} {:.2e}", worst[0], worst[1], worst[2]))
}

fn quadratic_excess_identity() -> (bool, String) {
    let mut rng = seeding::rng(17);
    let task = diag_quadratic(vec![0.3, -0.7, 1.1, 2.0]);
    let base = task.risk(task.minimizer());
    let worst = (0..500)
        .map(|_| {
            let w = random_point(&mut rng, 4, 10.0);
            let lhs = task.risk(&w) - base;
            (lhs - task.excess_risk(&w)).abs() / lhs.abs().max(1.0)
        })
        .fold(0.0, f64::max);
    (worst <= 1e-12, format!("max relative gap {worst:.1e}"))
}

fn logistic_convexity() -> (bool, String) {
    let mut rng = seeding::rng(18);
    let (f, c, n) = (3, 3, 20);
    let feats: Vec<f64> = (0..n * f).map(|_| rng.random_range(0.0..=1.0)).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let task = LogisticTask::new(feats, labels, f, c, 0.001).expect("valid");
    let bad = (0..1000)
        .filter(|_| {
            let u = random_point(&mut rng, task.dim(), 5.0);
            let v = random_point(&mut rng, task.dim(), 5.0);
            let mid: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
            let i = rng.random_range(0..n);
            task.loss(&mid, i) > 0.5 * (task.loss(&u, i) + task.loss(&v, i)) + 1e-12
        })
        .count();
    (bad == 0, format!("{bad} midpoint violations over 1000 segments"))
}

fn weiszfeld_residual() -> (bool, String) {
    let mut rng = seeding::rng(19);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let k = rng.random_range(3..12);
        let pts: Vec<Vec<f64>> = (0..k).map(|_| random_point(&mut rng, 3, 10.0)).collect();
        match weiszfeld(&pts, 1e-9 * k as f64, baselines::GEOMED_MAX_ITER) {
            Ok(m) if m.multiplicity == 0 => worst = worst.max(m.residual / (1e-6 * k as f64)),
            Ok(_) => {}
            Err(e) => return (false, e.to_string()),
        }
    }
    (worst <= 1.0, format!("max residual / (1e-6·k) = {worst:.2e}"))
}

fn mom_permutation_invariant() -> (bool, String) {
    let mut rng = seeding::rng(20);
    let n = 40;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..3).map(|_| rng.sample::<f64, _>(StandardNormal).powi(3)).collect())
        .collect();
    let part = PartitionScheme::seeded(n, 8, 5).expect("valid");
    let base = mom_gradient_with(&GradientMatrix::from_rows(&rows).expect("finite"), &part).expect("converges");
    // reverse the row order and relabel the same blocks
    let rev: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
    let mut blocks: Vec<Vec<usize>> = part.blocks().iter().map(|b| b.iter().map(|i| n - 1 - i).collect()).collect();
    blocks.reverse();
    let part_rev = PartitionScheme::from_blocks(blocks, n).expect("valid");
    let other = mom_gradient_with(&GradientMatrix::from_rows(&rev).expect("finite"), &part_rev).expect("converges");
    let gap = distance(&base, &other);
    (gap <= 1e-9, format!("distance between orderings {gap:.1e}"))
}

fn baselines_deterministic() -> (bool, String) {
    let task = small_quadratic(4);
    let mut cfg = StochasticConfig::new(StepSchedule::constant(0.01).expect("valid"), Budget::evaluations(2000));
    cfg.seed = 21;
    let same = baselines::sgd_run(&task, &cfg, &[0.0; 3]).ok() == baselines::sgd_run(&task, &cfg, &[0.0; 3]).ok()
        && baselines::svrg_run(&task, &cfg, &[0.0; 3]).ok() == baselines::svrg_run(&task, &cfg, &[0.0; 3]).ok();
    (same, "sgd and svrg compared bitwise".into())
}

fn noise_is_centered() -> (bool, String) {
    let mut worst = (0.0f64, NoiseFamily::Normal);
    for (k, family) in NoiseFamily::ALL.into_iter().enumerate() {
        let spec = NoiseSpec::at_level(family, 5).expect("valid");
        let xs = synth::sample_noise(&spec, 1_000_000, 100 + k as u64);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let z = mean.abs() / (sd / n.sqrt());
        if z > worst.0 {
            worst = (z, family);
        }
    }
    (worst.0 <= 3.0, format!("largest |mean|/SE = {:.2} ({:?})", worst.0, worst.1))
}

fn level_sd_is_monotone() -> (bool, String) {
    let ok = NoiseFamily::ALL.into_iter().all(|family| {
        let sds: Vec<f64> = (1..=synth::NUM_LEVELS)
            .map(|l| NoiseSpec::at_level(family, l).expect("valid").target_sd)
            .collect();
        sds.windows(2).all(|w| w[1] > w[0])
            && (sds[0] - synth::MIN_LEVEL_SD).abs() < 1e-9
            && (sds[sds.len() - 1] - synth::MAX_LEVEL_SD).abs() < 1e-9
    });
    (ok, "6 families × 15 levels".into())
}

fn generators_are_pure() -> (bool, String) {
    let noise = NoiseSpec::at_level(NoiseFamily::StudentT, 7).expect("valid");
    let a = synth::gen_regression(50, 3, &noise, 20, 5).expect("valid");
    let b = synth::gen_regression(50, 3, &noise, 20, 5).expect("valid");
    let same_reg = |x: &RegressionTask, y: &RegressionTask| x.inputs() == y.inputs() && x.responses() == y.responses();
    let q1 = synth::gen_noisy_quadratic(50, 3, &noise, 5).expect("valid");
    let q2 = synth::gen_noisy_quadratic(50, 3, &noise, 5).expect("valid");
    let ok = same_reg(&a.0, &b.0)
        && same_reg(&a.1, &b.1)
        && q1.noise() == q2.noise()
        && synth::gen_wstar(8, 3) == synth::gen_wstar(8, 3)
        && synth::sample_noise(&noise, 100, 2) == synth::sample_noise(&noise, 100, 2);
    (ok, "regression, quadratic, w* and noise regenerated".into())
}
