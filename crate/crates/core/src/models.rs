//! Per-example losses with analytic gradients.
//!
//! Three task types are provided: noisy quadratic risk minimization (true
//! risk known in closed form), least-squares regression, and ℓ2-regularized
//! multiclass logistic regression with a zero-pinned reference class.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::synth::NoiseSpec;

/// A finite sample of per-example losses `l(w; zᵢ)`, `i ∈ [n]`.
pub trait LossModel: Sync {
    fn num_examples(&self) -> usize;

    /// Parameter dimension.
    fn dim(&self) -> usize;

    /// `l(w; zᵢ)`. `i` must be `< num_examples()`.
    fn loss(&self, w: &[f64], i: usize) -> f64;

    /// Writes `∇l(w; zᵢ)` into `out` (length `dim()`).
    fn grad_into(&self, w: &[f64], i: usize, out: &mut [f64]);

    fn empirical_risk(&self, w: &[f64]) -> f64 {
        let n = self.num_examples();
        (0..n).map(|i| self.loss(w, i)).sum::<f64>() / n as f64
    }
}

/// Models whose population risk and its gradient are known exactly.
pub trait TrueRisk {
    fn dim(&self) -> usize;
    fn risk(&self, w: &[f64]) -> f64;
    fn risk_gradient(&self, w: &[f64]) -> Vec<f64>;
    fn minimizer(&self) -> &[f64];
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dim(expected: usize, w: &[f64]) -> Result<()> {
    if w.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            found: w.len(),
        })
    }
}

fn check_index(i: usize, n: usize) -> Result<()> {
    if i < n {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { index: i, len: n })
    }
}

/// Noisy quadratic: `R(w) = ⟨Σw, w⟩/2 + ⟨w, u⟩ + c`, observed through
/// `rᵢ(w) = (⟨w* − w, xᵢ⟩ + εᵢ)²/2`.
#[derive(Debug, Clone)]
pub struct QuadraticRiskTask {
    sigma: DMatrix<f64>,
    u: Vec<f64>,
    c: f64,
    w_star: Vec<f64>,
    noise_variance: f64,
    inputs: Vec<f64>,
    noise: Vec<f64>,
    d: usize,
}

impl QuadraticRiskTask {
    /// `inputs` is row-major `n × d`; `noise` has length `n`.
    ///
    /// `noise_variance` enters only the constant `c` and may be infinite.
    pub fn new(
        sigma: DMatrix<f64>,
        w_star: Vec<f64>,
        noise_variance: f64,
        inputs: Vec<f64>,
        noise: Vec<f64>,
    ) -> Result<Self> {
        let d = w_star.len();
        if d == 0 {
            return Err(Error::Empty("w_star"));
        }
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: sigma.nrows(),
            });
        }
        if (&sigma - sigma.transpose()).amax() > 1e-12 * sigma.amax().max(1.0) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                value: f64::NAN,
                reason: "must be symmetric",
            });
        }
        if sigma.clone().cholesky().is_none() {
            return Err(Error::InvalidParameter {
                name: "sigma",
                value: f64::NAN,
                reason: "must be positive definite",
            });
        }
        if inputs.len() != noise.len() * d {
            return Err(Error::DimensionMismatch {
                expected: noise.len() * d,
                found: inputs.len(),
            });
        }
        let ws = DVector::from_column_slice(&w_star);
        let sw = &sigma * &ws;
        let u: Vec<f64> = sw.iter().map(|v| -v).collect();
        let c = 0.5 * ws.dot(&sw) + 0.5 * noise_variance;
        Ok(Self {
            sigma,
            u,
            c,
            w_star,
            noise_variance,
            inputs,
            noise,
            d,
        })
    }

    /// A task with no sample, for exact-gradient runs.
    pub fn population(sigma: DMatrix<f64>, w_star: Vec<f64>) -> Result<Self> {
        Self::new(sigma, w_star, 0.0, Vec::new(), Vec::new())
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.u
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    pub fn w_star(&self) -> &[f64] {
        &self.w_star
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.d..(i + 1) * self.d]
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    /// Strong convexity `μ` and smoothness `Λ`: extreme eigenvalues of Σ.
    pub fn curvature(&self) -> (f64, f64) {
        let eig = self.sigma.clone().symmetric_eigenvalues();
        (eig.min(), eig.max())
    }

    /// `λ̄ = 2μΛ/(μ + Λ)`.
    pub fn lambda_bar(&self) -> f64 {
        let (mu, big_lambda) = self.curvature();
        2.0 * mu * big_lambda / (mu + big_lambda)
    }

    /// `R(w) − R(w*) = ½⟨Σ(w − w*), w − w*⟩`, computed directly so that
    /// infinite noise variance does not turn it into `∞ − ∞`.
    pub fn excess_risk(&self, w: &[f64]) -> f64 {
        let diff = DVector::from_iterator(self.d, w.iter().zip(&self.w_star).map(|(a, b)| a - b));
        0.5 * diff.dot(&(&self.sigma * &diff))
    }

    /// Minimizer of the empirical risk `(1/n) Σ rᵢ(w)` (`w*` plus the least-squares
    /// fit of the noise on the inputs).
    pub fn empirical_minimizer(&self) -> Vec<f64> {
        let n = self.noise.len();
        let x = DMatrix::from_row_slice(n, self.d, &self.inputs);
        let e = DVector::from_column_slice(&self.noise);
        let shift = crate::baselines::min_norm_least_squares(&x, &e);
        self.w_star.iter().zip(shift.iter()).map(|(a, b)| a + b).collect()
    }
}

impl LossModel for QuadraticRiskTask {
    fn num_examples(&self) -> usize {
        self.noise.len()
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn loss(&self, w: &[f64], i: usize) -> f64 {
        let r = residual(&self.w_star, w, self.input(i), self.noise[i]);
        0.5 * r * r
    }

    fn grad_into(&self, w: &[f64], i: usize, out: &mut [f64]) {
        let x = self.input(i);
        let r = residual(&self.w_star, w, x, self.noise[i]);
        for (o, xj) in out.iter_mut().zip(x) {
            *o = -r * xj;
        }
    }
}

fn residual(w_star: &[f64], w: &[f64], x: &[f64], eps: f64) -> f64 {
    w_star
        .iter()
        .zip(w)
        .zip(x)
        .map(|((a, b), xj)| (a - b) * xj)
        .sum::<f64>()
        + eps
}

impl TrueRisk for QuadraticRiskTask {
    fn dim(&self) -> usize {
        self.d
    }

    fn risk(&self, w: &[f64]) -> f64 {
        let wv = DVector::from_column_slice(w);
        0.5 * wv.dot(&(&self.sigma * &wv)) + dot(w, &self.u) + self.c
    }

    fn risk_gradient(&self, w: &[f64]) -> Vec<f64> {
        let wv = DVector::from_column_slice(w);
        let sw = &self.sigma * &wv;
        sw.iter().zip(&self.u).map(|(a, b)| a + b).collect()
    }

    fn minimizer(&self) -> &[f64] {
        &self.w_star
    }
}

/// Exact quadratic risk `R(w)`.
pub fn quadratic_true_risk(task: &QuadraticRiskTask, w: &[f64]) -> Result<f64> {
    check_dim(task.d, w)?;
    Ok(task.risk(w))
}

/// `∇rᵢ(w) = −(⟨w* − w, xᵢ⟩ + εᵢ)·xᵢ`.
pub fn noisy_quadratic_loss_grad(task: &QuadraticRiskTask, w: &[f64], i: usize) -> Result<Vec<f64>> {
    check_dim(task.d, w)?;
    check_index(i, task.num_examples())?;
    let mut g = vec![0.0; task.d];
    task.grad_into(w, i, &mut g);
    Ok(g)
}

/// Least-squares regression data `(xᵢ, yᵢ)`, with `l(w; z) = (⟨w, x⟩ − y)²`.
#[derive(Debug, Clone)]
pub struct RegressionTask {
    inputs: Vec<f64>,
    responses: Vec<f64>,
    d: usize,
    w_star: Option<Vec<f64>>,
    noise: Option<NoiseSpec>,
}

impl RegressionTask {
    /// `inputs` is row-major `n × d`.
    pub fn new(inputs: Vec<f64>, responses: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Empty("regression dimension"));
        }
        if inputs.len() != responses.len() * d {
            return Err(Error::DimensionMismatch {
                expected: responses.len() * d,
                found: inputs.len(),
            });
        }
        if inputs.iter().chain(&responses).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("regression data"));
        }
        Ok(Self {
            inputs,
            responses,
            d,
            w_star: None,
            noise: None,
        })
    }

    pub fn with_truth(mut self, w_star: Vec<f64>, noise: Option<NoiseSpec>) -> Result<Self> {
        check_dim(self.d, &w_star)?;
        self.w_star = Some(w_star);
        self.noise = noise;
        Ok(self)
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.d..(i + 1) * self.d]
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn w_star(&self) -> Option<&[f64]> {
        self.w_star.as_deref()
    }

    pub fn noise_spec(&self) -> Option<&NoiseSpec> {
        self.noise.as_ref()
    }

    pub fn design_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.responses.len(), self.d, &self.inputs)
    }

    /// Rows `rows` as a new task (same truth).
    pub fn subset(&self, rows: &[usize]) -> RegressionTask {
        let mut inputs = Vec::with_capacity(rows.len() * self.d);
        let mut responses = Vec::with_capacity(rows.len());
        for &i in rows {
            inputs.extend_from_slice(self.input(i));
            responses.push(self.responses[i]);
        }
        RegressionTask {
            inputs,
            responses,
            d: self.d,
            w_star: self.w_star.clone(),
            noise: self.noise.clone(),
        }
    }

    pub fn residual(&self, w: &[f64], i: usize) -> f64 {
        dot(self.input(i), w) - self.responses[i]
    }

    /// Root mean squared prediction error.
    pub fn rmse(&self, w: &[f64]) -> f64 {
        let n = self.responses.len();
        let sse: f64 = (0..n).map(|i| self.residual(w, i).powi(2)).sum();
        (sse / n as f64).sqrt()
    }

    pub fn mean_absolute_residual(&self, w: &[f64]) -> f64 {
        let n = self.responses.len();
        (0..n).map(|i| self.residual(w, i).abs()).sum::<f64>() / n as f64
    }
}

impl LossModel for RegressionTask {
    fn num_examples(&self) -> usize {
        self.responses.len()
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn loss(&self, w: &[f64], i: usize) -> f64 {
        self.residual(w, i).powi(2)
    }

    fn grad_into(&self, w: &[f64], i: usize, out: &mut [f64]) {
        let r2 = 2.0 * self.residual(w, i);
        for (o, xj) in out.iter_mut().zip(self.input(i)) {
            *o = r2 * xj;
        }
    }
}

/// `∇l(w; zᵢ) = 2(⟨w, xᵢ⟩ − yᵢ)·xᵢ`.
pub fn squared_loss_grad(task: &RegressionTask, w: &[f64], i: usize) -> Result<Vec<f64>> {
    check_dim(task.d, w)?;
    check_index(i, task.num_examples())?;
    let mut g = vec![0.0; task.d];
    task.grad_into(w, i, &mut g);
    Ok(g)
}

/// Multiclass logistic regression over `C` classes and `F` features.
///
/// Parameters are `C − 1` score vectors stored class-major
/// (`w[k·F + f]`); the last class has its score pinned at zero. The
/// per-example loss includes the penalty `a‖w‖²`.
#[derive(Debug, Clone)]
pub struct LogisticTask {
    features: Vec<f64>,
    labels: Vec<usize>,
    num_features: usize,
    num_classes: usize,
    reg: f64,
}

impl LogisticTask {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<usize>,
        num_features: usize,
        num_classes: usize,
        reg: f64,
    ) -> Result<Self> {
        if num_features == 0 {
            return Err(Error::Empty("features"));
        }
        if num_classes < 2 {
            return Err(Error::InvalidParameter {
                name: "num_classes",
                value: num_classes as f64,
                reason: "need at least two classes",
            });
        }
        if !(reg >= 0.0 && reg.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "reg",
                value: reg,
                reason: "must be finite and >= 0",
            });
        }
        if features.len() != labels.len() * num_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * num_features,
                found: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: num_classes,
            });
        }
        if features.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter {
                name: "features",
                value: f64::NAN,
                reason: "must be normalized to [0, 1]",
            });
        }
        Ok(Self {
            features,
            labels,
            num_features,
            num_classes,
            reg,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }

    /// Scores for all `C` classes, the last one fixed at 0.
    fn scores(&self, w: &[f64], i: usize) -> Vec<f64> {
        let x = self.features(i);
        let f = self.num_features;
        let mut s: Vec<f64> = (0..self.num_classes - 1)
            .map(|k| dot(&w[k * f..(k + 1) * f], x))
            .collect();
        s.push(0.0);
        s
    }

    pub fn predict(&self, w: &[f64], i: usize) -> usize {
        let s = self.scores(w, i);
        // first maximal score wins
        let mut best = 0;
        for (k, v) in s.iter().enumerate() {
            if *v > s[best] {
                best = k;
            }
        }
        best
    }

    /// Fraction of misclassified examples.
    pub fn error_rate(&self, w: &[f64]) -> f64 {
        let n = self.labels.len();
        let wrong = (0..n).filter(|&i| self.predict(w, i) != self.labels[i]).count();
        wrong as f64 / n as f64
    }

    fn penalty(&self, w: &[f64]) -> f64 {
        self.reg * dot(w, w)
    }
}

fn log_sum_exp(s: &[f64]) -> f64 {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

impl LossModel for LogisticTask {
    fn num_examples(&self) -> usize {
        self.labels.len()
    }

    fn dim(&self) -> usize {
        (self.num_classes - 1) * self.num_features
    }

    fn loss(&self, w: &[f64], i: usize) -> f64 {
        let s = self.scores(w, i);
        log_sum_exp(&s) - s[self.labels[i]] + self.penalty(w)
    }

    fn grad_into(&self, w: &[f64], i: usize, out: &mut [f64]) {
        let s = self.scores(w, i);
        let lse = log_sum_exp(&s);
        let x = self.features(i);
        let y = self.labels[i];
        let f = self.num_features;
        for k in 0..self.num_classes - 1 {
            let p = (s[k] - lse).exp() - if k == y { 1.0 } else { 0.0 };
            for j in 0..f {
                out[k * f + j] = p * x[j] + 2.0 * self.reg * w[k * f + j];
            }
        }
    }
}

/// Gradient of the regularized multinomial negative log-likelihood at example `i`.
pub fn logistic_loss_grad(task: &LogisticTask, w: &[f64], i: usize) -> Result<Vec<f64>> {
    check_dim(task.dim(), w)?;
    check_index(i, task.num_examples())?;
    let mut g = vec![0.0; task.dim()];
    task.grad_into(w, i, &mut g);
    Ok(g)
}

/// Outcome of [`finite_diff_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDiffReport {
    /// Max over coordinates of `|analytic − numeric| / max(1, |analytic|, |numeric|)`.
    pub max_rel_error: f64,
    pub worst_coordinate: usize,
    pub numeric: Vec<f64>,
    pub passed: bool,
}

/// Compares `grad_fn(w)` against central differences of `loss_fn` with
/// per-coordinate step `h = 10⁻⁶·(1 + |w_j|)`.
/// Relative central-difference step. Large enough that cancellation stays
/// well below the 1e-6 tolerances used on losses of size ~10³.
pub const FD_STEP: f64 = 1e-4;

pub fn finite_diff_check(
    loss_fn: impl Fn(&[f64]) -> f64,
    grad_fn: impl Fn(&[f64]) -> Vec<f64>,
    w: &[f64],
    tol: f64,
) -> FiniteDiffReport {
    let analytic = grad_fn(w);
    let mut probe = w.to_vec();
    let mut numeric = Vec::with_capacity(w.len());
    let mut max_rel_error = 0.0;
    let mut worst_coordinate = 0;
    for j in 0..w.len() {
        let h = FD_STEP * (1.0 + w[j].abs());
        probe[j] = w[j] + h;
        let up = loss_fn(&probe);
        probe[j] = w[j] - h;
        let down = loss_fn(&probe);
        probe[j] = w[j];
        // the realized step differs from h by rounding in w[j] ± h
        let g = (up - down) / ((w[j] + h) - (w[j] - h));
        let a = analytic.get(j).copied().unwrap_or(f64::NAN);
        let err = (a - g).abs() / 1f64.max(a.abs()).max(g.abs());
        if err.is_nan() || err > max_rel_error {
            max_rel_error = err;
            worst_coordinate = j;
        }
        numeric.push(g);
    }
    let passed = analytic.len() == w.len() && max_rel_error <= tol;
    FiniteDiffReport {
        max_rel_error,
        worst_coordinate,
        numeric,
        passed,
    }
}

/// The three benchmark task types behind one handle.
#[derive(Debug, Clone)]
pub enum Task {
    Quadratic(QuadraticRiskTask),
    Regression(RegressionTask),
    Logistic(LogisticTask),
}

impl Task {
    pub fn model(&self) -> &dyn LossModel {
        match self {
            Task::Quadratic(t) => t,
            Task::Regression(t) => t,
            Task::Logistic(t) => t,
        }
    }
}
