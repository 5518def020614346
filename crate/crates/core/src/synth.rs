//! Synthetic tasks with heavy-tailed noise, and evaluation metrics.
//!
//! Six noise families are provided. Every family is centered analytically
//! (its mean is subtracted in closed form) and calibrated so that noise
//! level `ℓ ∈ 1..=15` has standard deviation
//! `0.3 + (ℓ − 1)·(20 − 0.3)/14`. All calibrations are closed form.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, LogNormal, Pareto, StandardNormal, StudentT, Triangular};
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::models::{QuadraticRiskTask, RegressionTask};
use crate::seeding::{self, Rng};

pub const NUM_LEVELS: u8 = 15;
pub const MIN_LEVEL_SD: f64 = 0.3;
pub const MAX_LEVEL_SD: f64 = 20.0;

/// Shape used when calibrating log-logistic noise (finite fourth moment).
pub const LOGLOGISTIC_SHAPE: f64 = 5.0;
/// Tail index used when calibrating Pareto noise.
pub const PARETO_SHAPE: f64 = 4.5;
/// Degrees of freedom used when calibrating Student-t noise.
pub const STUDENT_T_DOF: f64 = 5.0;

/// Standard deviation assigned to noise level `level`.
pub fn level_sd(level: u8) -> Result<f64> {
    if !(1..=NUM_LEVELS).contains(&level) {
        return Err(Error::InvalidParameter {
            name: "noise level",
            value: level as f64,
            reason: "must be in 1..=15",
        });
    }
    let step = (MAX_LEVEL_SD - MIN_LEVEL_SD) / (NUM_LEVELS - 1) as f64;
    Ok(MIN_LEVEL_SD + (level - 1) as f64 * step)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseFamily {
    Normal,
    Lognormal,
    Loglogistic,
    TriangularSymmetric,
    Pareto,
    StudentT,
}

impl NoiseFamily {
    pub const ALL: [NoiseFamily; 6] = [
        NoiseFamily::Normal,
        NoiseFamily::Lognormal,
        NoiseFamily::Loglogistic,
        NoiseFamily::TriangularSymmetric,
        NoiseFamily::Pareto,
        NoiseFamily::StudentT,
    ];
}

/// Family-specific parameters of the uncentered distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseParams {
    Normal { sd: f64 },
    Lognormal { log_location: f64, log_scale: f64 },
    Loglogistic { scale: f64, shape: f64 },
    TriangularSymmetric { half_width: f64 },
    Pareto { scale: f64, shape: f64 },
    StudentT { scale: f64, dof: f64 },
}

/// A centered noise distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    /// Calibrated level, `None` for explicitly parameterized specs.
    pub level: Option<u8>,
    pub params: NoiseParams,
    /// Standard deviation; infinite for heavy stress settings.
    pub target_sd: f64,
}

impl NoiseSpec {
    /// Family calibrated to the standard deviation of `level`.
    pub fn at_level(family: NoiseFamily, level: u8) -> Result<Self> {
        let mut spec = Self::with_sd(family, level_sd(level)?)?;
        spec.level = Some(level);
        Ok(spec)
    }

    /// Family calibrated to an arbitrary standard deviation.
    pub fn with_sd(family: NoiseFamily, sd: f64) -> Result<Self> {
        let sd = positive("sd", sd)?;
        let params = match family {
            NoiseFamily::Normal => NoiseParams::Normal { sd },
            NoiseFamily::Lognormal => {
                // Var = (y − 1)·y with y = exp(σ²)
                let y = 0.5 * (1.0 + (1.0 + 4.0 * sd * sd).sqrt());
                NoiseParams::Lognormal {
                    log_location: 0.0,
                    log_scale: y.ln().sqrt(),
                }
            }
            NoiseFamily::Loglogistic => NoiseParams::Loglogistic {
                scale: sd / loglogistic_unit_sd(LOGLOGISTIC_SHAPE),
                shape: LOGLOGISTIC_SHAPE,
            },
            NoiseFamily::TriangularSymmetric => NoiseParams::TriangularSymmetric {
                half_width: sd * 6f64.sqrt(),
            },
            NoiseFamily::Pareto => {
                let k = PARETO_SHAPE;
                NoiseParams::Pareto {
                    scale: sd * (k - 1.0) * ((k - 2.0) / k).sqrt(),
                    shape: k,
                }
            }
            NoiseFamily::StudentT => {
                let nu = STUDENT_T_DOF;
                NoiseParams::StudentT {
                    scale: sd / (nu / (nu - 2.0)).sqrt(),
                    dof: nu,
                }
            }
        };
        Self::from_params(params)
    }

    /// Explicit parameters. Heavy settings with infinite variance are
    /// allowed (`target_sd = ∞`) as long as the mean exists for centering.
    pub fn from_params(params: NoiseParams) -> Result<Self> {
        let (family, sd) = match params {
            NoiseParams::Normal { sd } => (NoiseFamily::Normal, positive("sd", sd)?),
            NoiseParams::Lognormal {
                log_location,
                log_scale,
            } => {
                let s2 = positive("log_scale", log_scale)?.powi(2);
                if !log_location.is_finite() {
                    return Err(Error::NonFinite("log_location"));
                }
                let var = (s2.exp() - 1.0) * (2.0 * log_location + s2).exp();
                (NoiseFamily::Lognormal, var.sqrt())
            }
            NoiseParams::Loglogistic { scale, shape } => {
                let scale = positive("scale", scale)?;
                let shape = require_above("shape", shape, 1.0)?;
                let sd = if shape > 2.0 {
                    scale * loglogistic_unit_sd(shape)
                } else {
                    f64::INFINITY
                };
                (NoiseFamily::Loglogistic, sd)
            }
            NoiseParams::TriangularSymmetric { half_width } => (
                NoiseFamily::TriangularSymmetric,
                positive("half_width", half_width)? / 6f64.sqrt(),
            ),
            NoiseParams::Pareto { scale, shape } => {
                let scale = positive("scale", scale)?;
                let k = require_above("shape", shape, 1.0)?;
                let sd = if k > 2.0 {
                    scale / (k - 1.0) * (k / (k - 2.0)).sqrt()
                } else {
                    f64::INFINITY
                };
                (NoiseFamily::Pareto, sd)
            }
            NoiseParams::StudentT { scale, dof } => {
                let scale = positive("scale", scale)?;
                let nu = require_above("dof", dof, 1.0)?;
                let sd = if nu > 2.0 {
                    scale * (nu / (nu - 2.0)).sqrt()
                } else {
                    f64::INFINITY
                };
                (NoiseFamily::StudentT, sd)
            }
        };
        Ok(Self {
            family,
            level: None,
            params,
            target_sd: sd,
        })
    }

    pub fn normal(sd: f64) -> Result<Self> {
        Self::from_params(NoiseParams::Normal { sd })
    }

    pub fn lognormal(log_location: f64, log_scale: f64) -> Result<Self> {
        Self::from_params(NoiseParams::Lognormal {
            log_location,
            log_scale,
        })
    }

    pub fn has_finite_variance(&self) -> bool {
        self.target_sd.is_finite()
    }

    pub fn variance(&self) -> f64 {
        self.target_sd * self.target_sd
    }

    /// Mean of the uncentered distribution, subtracted from every draw.
    pub fn offset(&self) -> f64 {
        match self.params {
            NoiseParams::Normal { .. } | NoiseParams::TriangularSymmetric { .. } => 0.0,
            NoiseParams::StudentT { .. } => 0.0,
            NoiseParams::Lognormal {
                log_location,
                log_scale,
            } => (log_location + 0.5 * log_scale * log_scale).exp(),
            NoiseParams::Loglogistic { scale, shape } => {
                let b = PI / shape;
                scale * b / b.sin()
            }
            NoiseParams::Pareto { scale, shape } => shape * scale / (shape - 1.0),
        }
    }

    /// Support of the centered distribution, when bounded.
    pub fn support(&self) -> (f64, f64) {
        match self.params {
            NoiseParams::TriangularSymmetric { half_width } => (-half_width, half_width),
            NoiseParams::Lognormal { .. } | NoiseParams::Loglogistic { .. } => {
                (-self.offset(), f64::INFINITY)
            }
            NoiseParams::Pareto { scale, .. } => (scale - self.offset(), f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn draw(&self, rng: &mut Rng) -> f64 {
        let raw = match self.params {
            NoiseParams::Normal { sd } => sd * rng.sample::<f64, _>(StandardNormal),
            NoiseParams::Lognormal {
                log_location,
                log_scale,
            } => LogNormal::new(log_location, log_scale)
                .expect("validated")
                .sample(rng),
            NoiseParams::Loglogistic { scale, shape } => {
                let u: f64 = rng.random();
                scale * (u / (1.0 - u)).powf(1.0 / shape)
            }
            NoiseParams::TriangularSymmetric { half_width } => {
                Triangular::new(-half_width, half_width, 0.0)
                    .expect("validated")
                    .sample(rng)
            }
            NoiseParams::Pareto { scale, shape } => {
                Pareto::new(scale, shape).expect("validated").sample(rng)
            }
            NoiseParams::StudentT { scale, dof } => {
                scale * StudentT::new(dof).expect("validated").sample(rng)
            }
        };
        raw - self.offset()
    }

    pub fn sample_with(&self, n: usize, rng: &mut Rng) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}

fn require_above(name: &'static str, value: f64, floor: f64) -> Result<f64> {
    if value.is_finite() && value > floor {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "too small for a finite mean",
        })
    }
}

fn loglogistic_unit_sd(shape: f64) -> f64 {
    let b = PI / shape;
    (2.0 * b / (2.0 * b).sin() - b * b / (b.sin() * b.sin())).sqrt()
}

/// `n` i.i.d. centered draws.
pub fn sample_noise(spec: &NoiseSpec, n: usize, seed: u64) -> Vec<f64> {
    spec.sample_with(n, &mut seeding::rng(seed))
}

/// `k`-th element (1-based) of `π/4 + (−1)^(k−1)·(k−1)·π/8`.
pub fn wstar_sequence(k: usize) -> f64 {
    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
    FRAC_PI_4 + sign * (k as f64 - 1.0) * FRAC_PI_8
}

pub const WSTAR_POOL: usize = 500;

fn wstar_with(d: usize, rng: &mut Rng) -> Vec<f64> {
    (0..d)
        .map(|_| wstar_sequence(rng.random_range(1..=WSTAR_POOL)))
        .collect()
}

/// Minimizer with components drawn uniformly from the first 500 sequence terms.
pub fn gen_wstar(d: usize, seed: u64) -> Vec<f64> {
    wstar_with(d, &mut seeding::rng(seed))
}

fn gaussian_rows(n: usize, d: usize, input_sd: f64, rng: &mut Rng) -> Vec<f64> {
    (0..n * d)
        .map(|_| input_sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Noisy quadratic task with standard Gaussian inputs.
pub fn gen_noisy_quadratic(n: usize, d: usize, noise: &NoiseSpec, seed: u64) -> Result<QuadraticRiskTask> {
    gen_noisy_quadratic_scaled(n, d, noise, 1.0, seed)
}

/// Noisy quadratic task with inputs `N(0, σ²·I)`, so `Σ = σ²·I`.
pub fn gen_noisy_quadratic_scaled(
    n: usize,
    d: usize,
    noise: &NoiseSpec,
    input_variance: f64,
    seed: u64,
) -> Result<QuadraticRiskTask> {
    if n == 0 || d == 0 {
        return Err(Error::Empty("task size"));
    }
    let input_variance = positive("input_variance", input_variance)?;
    let mut rng = seeding::rng(seed);
    let w_star = wstar_with(d, &mut rng);
    let inputs = gaussian_rows(n, d, input_variance.sqrt(), &mut rng);
    let eps = noise.sample_with(n, &mut rng);
    let sigma = DMatrix::identity(d, d) * input_variance;
    QuadraticRiskTask::new(sigma, w_star, noise.variance(), inputs, eps)
}

/// Training set of size `n` and test set of size `test_size` sharing `w*`.
///
/// The two sets come from distinct ChaCha streams of the same seed.
pub fn gen_regression(
    n: usize,
    d: usize,
    noise: &NoiseSpec,
    test_size: usize,
    seed: u64,
) -> Result<(RegressionTask, RegressionTask)> {
    if n == 0 || d == 0 || test_size == 0 {
        return Err(Error::Empty("task size"));
    }
    let mut train_rng = seeding::rng(seed);
    let w_star = wstar_with(d, &mut train_rng);
    let train = regression_sample(n, d, &w_star, noise, &mut train_rng)?;
    let mut test_rng = seeding::rng(seed);
    test_rng.set_stream(1);
    let test = regression_sample(test_size, d, &w_star, noise, &mut test_rng)?;
    Ok((train, test))
}

fn regression_sample(
    n: usize,
    d: usize,
    w_star: &[f64],
    noise: &NoiseSpec,
    rng: &mut Rng,
) -> Result<RegressionTask> {
    let inputs = gaussian_rows(n, d, 1.0, rng);
    let eps = noise.sample_with(n, rng);
    let y = (0..n)
        .map(|i| {
            let x = &inputs[i * d..(i + 1) * d];
            x.iter().zip(w_star).map(|(a, b)| a * b).sum::<f64>() + eps[i]
        })
        .collect();
    RegressionTask::new(inputs, y, d)?.with_truth(w_star.to_vec(), Some(noise.clone()))
}

/// `RMSE(w) − RMSE(w*)` on `test`.
pub fn excess_test_rmse(w: &[f64], w_star: &[f64], test: &RegressionTask) -> f64 {
    test.rmse(w) - test.rmse(w_star)
}

/// Metrics at one recorded iteration. Absent metrics are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub excess_emp_risk: Option<f64>,
    pub excess_true_risk: Option<f64>,
    pub dist_to_wstar: Option<f64>,
    pub test_metric: Option<f64>,
}

/// One seeded run of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub experiment: String,
    pub method: String,
    pub trial: usize,
    pub seed: u64,
    pub metrics: Vec<IterationMetrics>,
}

impl TrialRecord {
    pub fn final_metrics(&self) -> Option<&IterationMetrics> {
        self.metrics.last()
    }
}

/// Across-trial mean and (population) variance of one metric per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricStats {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskSummary {
    pub trials: usize,
    pub iterations: Vec<usize>,
    pub excess_emp_risk: Option<MetricStats>,
    pub excess_true_risk: Option<MetricStats>,
    pub dist_to_wstar: Option<MetricStats>,
    pub test_metric: Option<MetricStats>,
}

/// Per-iteration mean and variance across trials.
///
/// All records must have the same number of rows. A metric is summarized
/// only when every record reports it at every row.
pub fn risk_stats(records: &[TrialRecord]) -> Result<RiskSummary> {
    let first = records.first().ok_or(Error::Empty("trial records"))?;
    let len = first.metrics.len();
    if let Some(bad) = records.iter().find(|r| r.metrics.len() != len) {
        return Err(Error::DimensionMismatch {
            expected: len,
            found: bad.metrics.len(),
        });
    }
    let iterations = first.metrics.iter().map(|m| m.iteration).collect();
    let stats = |get: fn(&IterationMetrics) -> Option<f64>| -> Option<MetricStats> {
        let mut mean = vec![0.0; len];
        let mut variance = vec![0.0; len];
        for t in 0..len {
            // Welford
            let (mut count, mut mu, mut m2) = (0.0, 0.0, 0.0);
            for r in records {
                let x = get(&r.metrics[t])?;
                count += 1.0;
                let delta = x - mu;
                mu += delta / count;
                m2 += delta * (x - mu);
            }
            mean[t] = mu;
            variance[t] = m2 / count;
        }
        Some(MetricStats { mean, variance })
    };
    Ok(RiskSummary {
        trials: records.len(),
        iterations,
        excess_emp_risk: stats(|m| m.excess_emp_risk),
        excess_true_risk: stats(|m| m.excess_true_risk),
        dist_to_wstar: stats(|m| m.dist_to_wstar),
        test_metric: stats(|m| m.test_metric),
    })
}
