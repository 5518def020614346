//! Robust gradient descent.
//!
//! Each step collects the per-example gradients at the current iterate and
//! replaces their sample mean by a coordinate-wise smoothed truncated mean
//! (see [`estimate_risk_gradient`]). The per-coordinate second moment bound
//! is re-estimated from the same gradients at every step.

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;

use crate::catoni::{self, Confidence};
use crate::error::{positive, Error, Result};
use crate::models::{LossModel, TrueRisk};
use crate::normal;
use crate::seeding::{self, Rng};

/// Row-major `n × d` matrix of per-example gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMatrix {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl GradientMatrix {
    pub fn new(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Empty("gradient matrix"));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient matrix"));
        }
        Ok(Self { data, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Self::new(rows.concat(), rows.len(), d)
    }

    /// Gradients of `model` at `w`, over `rows` or all examples.
    pub fn from_model<M: LossModel + ?Sized>(model: &M, w: &[f64], rows: Option<&[usize]>) -> Result<Self> {
        let d = model.dim();
        if w.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: w.len(),
            });
        }
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..model.num_examples()).collect();
                &all
            }
        };
        let mut data = vec![0.0; rows.len() * d];
        for (chunk, &i) in data.chunks_mut(d.max(1)).zip(rows) {
            model.grad_into(w, i, chunk);
        }
        Self::new(data, rows.len(), d)
    }

    pub fn num_rows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.iter().skip(j).step_by(self.d).copied().collect()
    }

    pub fn column_mean(&self, j: usize) -> f64 {
        self.data.iter().skip(j).step_by(self.d).sum::<f64>() / self.n as f64
    }

    pub fn column_second_moment(&self, j: usize) -> f64 {
        self.data.iter().skip(j).step_by(self.d).map(|g| g * g).sum::<f64>() / self.n as f64
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.d).map(|j| self.column_mean(j)).collect()
    }
}

/// Second-moment bound per coordinate: `multiplier × mean(g_j²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceBoundPolicy {
    multiplier: f64,
}

impl VarianceBoundPolicy {
    pub const DEFAULT_MULTIPLIER: f64 = 0.5;

    pub fn new(multiplier: f64) -> Result<Self> {
        Ok(Self {
            multiplier: positive("multiplier", multiplier)?,
        })
    }

    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    pub fn bound(&self, grads: &GradientMatrix, j: usize) -> f64 {
        self.multiplier * grads.column_second_moment(j)
    }
}

impl Default for VarianceBoundPolicy {
    fn default() -> Self {
        Self {
            multiplier: Self::DEFAULT_MULTIPLIER,
        }
    }
}

const PARALLEL_COLUMNS: usize = 64;

/// Coordinate-wise smoothed truncated mean of the gradient columns.
///
/// Coordinate `j` uses `v_j = multiplier·mean(g_j²)`, the scale
/// [`catoni::scale_for`] and precision [`catoni::default_noise_precision`].
/// Coordinates whose gradients are all zero return 0.
pub fn estimate_risk_gradient(grads: &GradientMatrix, delta: f64, policy: &VarianceBoundPolicy) -> Result<Vec<f64>> {
    let conf = Confidence::new(delta)?;
    let coords: Vec<usize> = (0..grads.d).collect();
    Ok(robust_coordinates(grads, conf, policy, &coords))
}

fn robust_coordinates(grads: &GradientMatrix, conf: Confidence, policy: &VarianceBoundPolicy, coords: &[usize]) -> Vec<f64> {
    let log_inv = conf.log_inverse();
    let beta = (2.0 * log_inv).sqrt();
    let n = grads.n as f64;
    let one = |&j: &usize| {
        let v = policy.bound(grads, j);
        if v == 0.0 {
            return 0.0;
        }
        let s = (n * v / (2.0 * log_inv)).sqrt();
        catoni::smoothed_mean_slice(&grads.column(j), s, beta)
    };
    if coords.len() >= PARALLEL_COLUMNS {
        coords.par_iter().map(one).collect()
    } else {
        coords.iter().map(one).collect()
    }
}

/// Step-size rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `α/λ̄` at every step, `0 < α < 1`.
    Fixed { alpha: f64, lambda_bar: f64 },
    /// `1/((2 + t)·λ̄)`.
    Decaying { lambda_bar: f64 },
}

impl StepSchedule {
    pub fn fixed(alpha: f64, lambda_bar: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
                reason: "must lie in (0, 1)",
            });
        }
        Ok(Self::Fixed {
            alpha,
            lambda_bar: positive("lambda_bar", lambda_bar)?,
        })
    }

    pub fn decaying(lambda_bar: f64) -> Result<Self> {
        Ok(Self::Decaying {
            lambda_bar: positive("lambda_bar", lambda_bar)?,
        })
    }

    /// A fixed schedule whose step is exactly `step` (`α = 1/2`, `λ̄ = 1/(2·step)`).
    pub fn constant(step: f64) -> Result<Self> {
        let step = positive("step", step)?;
        Self::fixed(0.5, 0.5 / step)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Fixed { alpha, lambda_bar } => Self::fixed(alpha, lambda_bar).map(drop),
            Self::Decaying { lambda_bar } => Self::decaying(lambda_bar).map(drop),
        }
    }
}

pub fn step_size(schedule: &StepSchedule, t: usize) -> f64 {
    match *schedule {
        StepSchedule::Fixed { alpha, lambda_bar } => alpha / lambda_bar,
        StepSchedule::Decaying { lambda_bar } => 1.0 / ((2.0 + t as f64) * lambda_bar),
    }
}

/// Closed ℓ2 ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    center: Vec<f64>,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("ball center"));
        }
        Ok(Self {
            center,
            radius: positive("radius", radius)?,
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        distance(w, &self.center) <= self.radius
    }

    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        let dist = distance(w, &self.center);
        if dist <= self.radius {
            return w.to_vec();
        }
        // rounding can leave the scaled point a hair outside; pull it in
        // geometrically and fall back to the center
        for k in 0..=52 {
            let shrink = self.radius / dist * (1.0 - f64::EPSILON * (1u64 << k) as f64 / 2.0);
            let out: Vec<f64> = w
                .iter()
                .zip(&self.center)
                .map(|(x, c)| c + shrink * (x - c))
                .collect();
            if distance(&out, &self.center) <= self.radius {
                return out;
            }
        }
        self.center.clone()
    }
}

/// Euclidean projection of `w` onto the ball around `center`.
pub fn project(w: &[f64], center: &[f64], radius: f64) -> Result<Vec<f64>> {
    if w.len() != center.len() {
        return Err(Error::DimensionMismatch {
            expected: center.len(),
            found: w.len(),
        });
    }
    Ok(Ball::new(center.to_vec(), radius)?.project(w))
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Iteration and/or gradient-evaluation cap. One evaluation is one
/// per-example gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Budget {
    pub max_iters: Option<usize>,
    pub max_evals: Option<usize>,
}

impl Budget {
    pub fn iterations(t: usize) -> Self {
        Self {
            max_iters: Some(t),
            max_evals: None,
        }
    }

    pub fn evaluations(evals: usize) -> Self {
        Self {
            max_iters: None,
            max_evals: Some(evals),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.max_iters, self.max_evals) {
            (None, None) => Err(Error::Config("budget needs max_iters or max_evals".into())),
            (Some(0), _) | (_, Some(0)) => Err(Error::InvalidParameter {
                name: "budget",
                value: 0.0,
                reason: "must be positive",
            }),
            _ => Ok(()),
        }
    }

    /// Number of whole steps affordable at `cost` evaluations each.
    pub fn steps(&self, cost: usize) -> usize {
        let by_evals = self.max_evals.map_or(usize::MAX, |e| e / cost.max(1));
        self.max_iters.unwrap_or(usize::MAX).min(by_evals)
    }

    /// True when one more operation costing `cost` fits after `used`
    /// evaluations and `iters` steps.
    pub(crate) fn allows(&self, iters: usize, used: usize, cost: usize) -> bool {
        self.max_iters.is_none_or(|t| iters < t) && self.max_evals.is_none_or(|e| used + cost <= e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub step_size: f64,
    /// Norm of the update direction (the estimated gradient).
    pub direction_norm: f64,
    /// Cumulative gradient evaluations after this step.
    pub evals: usize,
}

/// Recorded iterates with their iteration indices, and per-step metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub iterates: Vec<Vec<f64>>,
    /// Iteration index of each recorded iterate; `0..=T` unless thinned.
    pub iterations: Vec<usize>,
    pub steps: Vec<StepInfo>,
}

impl Trajectory {
    pub(crate) fn start(w0: &[f64]) -> Self {
        Self {
            iterates: vec![w0.to_vec()],
            iterations: vec![0],
            steps: Vec::new(),
        }
    }

    pub(crate) fn record(&mut self, t: usize, w: &[f64]) {
        self.iterates.push(w.to_vec());
        self.iterations.push(t);
    }

    pub fn final_iterate(&self) -> &[f64] {
        self.iterates.last().expect("trajectory holds w0")
    }

    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn evaluations(&self) -> usize {
        self.steps.last().map_or(0, |s| s.evals)
    }
}

/// Settings shared by all first-order drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct GdConfig {
    pub schedule: StepSchedule,
    pub budget: Budget,
    pub projection: Option<Ball>,
    pub minibatch: Option<usize>,
    pub seed: u64,
}

impl GdConfig {
    pub fn new(schedule: StepSchedule, budget: Budget) -> Self {
        Self {
            schedule,
            budget,
            projection: None,
            minibatch: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.budget.validate()?;
        if self.minibatch == Some(0) {
            return Err(Error::InvalidParameter {
                name: "minibatch",
                value: 0.0,
                reason: "must be positive",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgdConfig {
    pub delta: f64,
    pub schedule: StepSchedule,
    pub policy: VarianceBoundPolicy,
    pub budget: Budget,
    pub projection: Option<Ball>,
    pub minibatch: Option<usize>,
    pub coord_subset: Option<usize>,
    pub seed: u64,
}

impl RgdConfig {
    pub fn new(delta: f64, schedule: StepSchedule, budget: Budget) -> Self {
        Self {
            delta,
            schedule,
            policy: VarianceBoundPolicy::default(),
            budget,
            projection: None,
            minibatch: None,
            coord_subset: None,
            seed: 0,
        }
    }

    pub fn gd_config(&self) -> GdConfig {
        GdConfig {
            schedule: self.schedule,
            budget: self.budget,
            projection: self.projection.clone(),
            minibatch: self.minibatch,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Confidence::new(self.delta)?;
        self.gd_config().validate()?;
        if self.coord_subset == Some(0) {
            return Err(Error::InvalidParameter {
                name: "coord_subset",
                value: 0.0,
                reason: "must be positive",
            });
        }
        Ok(())
    }
}

fn check_start(d: usize, w0: &[f64], projection: Option<&Ball>) -> Result<()> {
    if w0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: w0.len(),
        });
    }
    if let Some(ball) = projection {
        if ball.center.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: ball.center.len(),
            });
        }
    }
    if w0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial iterate"));
    }
    Ok(())
}

/// Runs `steps` updates `w ← Π(w − step_t·direction(t, w))`.
pub(crate) fn descend<F>(
    w0: &[f64],
    schedule: &StepSchedule,
    projection: Option<&Ball>,
    steps: usize,
    cost: usize,
    mut direction: F,
) -> Result<Trajectory>
where
    F: FnMut(usize, &[f64]) -> Result<Vec<f64>>,
{
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "budget",
            value: 0.0,
            reason: "does not cover a single step",
        });
    }
    let mut traj = Trajectory::start(w0);
    let mut w = w0.to_vec();
    for t in 0..steps {
        let g = direction(t, &w)?;
        let eta = step_size(schedule, t);
        for (wj, gj) in w.iter_mut().zip(&g) {
            *wj -= eta * gj;
        }
        if let Some(ball) = projection {
            w = ball.project(&w);
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("iterate"));
        }
        traj.steps.push(StepInfo {
            step_size: eta,
            direction_norm: norm(&g),
            evals: (t + 1) * cost,
        });
        traj.record(t + 1, &w);
    }
    Ok(traj)
}

/// Rows used at one step: all of them, or a fresh uniform subset drawn
/// without replacement.
pub(crate) fn batch_rows(n: usize, minibatch: Option<usize>, rng: &mut Rng) -> Option<Vec<usize>> {
    match minibatch {
        Some(b) if b < n => {
            let mut rows = index::sample(rng, n, b).into_vec();
            rows.sort_unstable();
            Some(rows)
        }
        _ => None,
    }
}

/// Robust gradient descent from `w0`.
///
/// With `minibatch = b` each step draws `b` examples without replacement.
/// With `coord_subset = m < d` only `m` random coordinates are estimated
/// robustly and the rest use the sample mean. Neither option consumes
/// randomness when it covers everything.
pub fn rgd_run<M: LossModel + ?Sized>(model: &M, config: &RgdConfig, w0: &[f64]) -> Result<Trajectory> {
    config.validate()?;
    check_start(model.dim(), w0, config.projection.as_ref())?;
    let n = model.num_examples();
    if n == 0 {
        return Err(Error::Empty("training examples"));
    }
    let d = model.dim();
    let conf = Confidence::new(config.delta)?;
    let cost = config.minibatch.map_or(n, |b| b.min(n));
    let steps = config.budget.steps(cost);
    let mut rng = seeding::rng(config.seed);
    descend(w0, &config.schedule, config.projection.as_ref(), steps, cost, |_, w| {
        let rows = batch_rows(n, config.minibatch, &mut rng);
        let grads = GradientMatrix::from_model(model, w, rows.as_deref())?;
        match config.coord_subset {
            Some(m) if m < d => {
                let mut g = grads.mean();
                let coords = index::sample(&mut rng, d, m).into_vec();
                let robust = robust_coordinates(&grads, conf, &config.policy, &coords);
                for (j, v) in coords.into_iter().zip(robust) {
                    g[j] = v;
                }
                Ok(g)
            }
            _ => {
                let all: Vec<usize> = (0..d).collect();
                Ok(robust_coordinates(&grads, conf, &config.policy, &all))
            }
        }
    })
}

/// Gradient descent on the exact risk gradient (no sampling error).
pub fn oracle_run<R: TrueRisk + ?Sized>(
    risk: &R,
    schedule: &StepSchedule,
    iterations: usize,
    projection: Option<&Ball>,
    w0: &[f64],
) -> Result<Trajectory> {
    schedule.validate()?;
    check_start(risk.dim(), w0, projection)?;
    descend(w0, schedule, projection, iterations, 0, |_, w| Ok(risk.risk_gradient(w)))
}

/// Upper bound on `E‖ŵ_(t+1) − ŵ_(t)‖²` for one robust step with step size
/// `alpha`, `n` examples in dimension `d`, second-moment bound `v` and
/// true gradient norm `grad_norm`:
///
/// ```text
/// 2α²·( (d·√(2πb²)/2)·( √(v/n)·(1 − 2Φ(−1/√d)) + √(2vd/(nπ))·e^(−2d) ) + ‖∇R‖² ),  b² = vd/n
/// ```
pub fn update_variance_bound(n: usize, d: usize, alpha: f64, v: f64, grad_norm: f64) -> Result<f64> {
    if n == 0 || d == 0 {
        return Err(Error::Empty("update variance shape"));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "must be finite and >= 0",
        });
    }
    let v = positive("v", v)?;
    if !(grad_norm >= 0.0 && grad_norm.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "grad_norm",
            value: grad_norm,
            reason: "must be finite and >= 0",
        });
    }
    let (nf, df) = (n as f64, d as f64);
    let b2 = v * df / nf;
    let lead = df * (2.0 * std::f64::consts::PI * b2).sqrt() / 2.0;
    let inner = (v / nf).sqrt() * (1.0 - 2.0 * normal::cdf(-1.0 / df.sqrt()))
        + (2.0 * v * df / (nf * std::f64::consts::PI)).sqrt() * (-2.0 * df).exp();
    Ok(2.0 * alpha * alpha * (lead * inner + grad_norm * grad_norm))
}

/// Uniform draw from `[−half_width, half_width]^d`.
pub fn init_uniform_box(d: usize, half_width: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeding::rng(seed);
    (0..d).map(|_| rng.random_range(-half_width..=half_width)).collect()
}

/// `w* + U[−radius, radius]^d`.
pub fn init_around(center: &[f64], radius: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeding::rng(seed);
    center
        .iter()
        .map(|c| c + rng.random_range(-radius..=radius))
        .collect()
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::catoni::{smoothed_mean, ScalarSample, SmoothingParams};

    #[test]
    fn zero_matrix_gives_zero_gradient() {
        let g = GradientMatrix::new(vec![0.0; 12], 4, 3).unwrap();
        let est = estimate_risk_gradient(&g, 0.01, &VarianceBoundPolicy::default()).unwrap();
        assert_eq!(est, vec![0.0; 3]);
    }

    #[test]
    fn single_column_matches_scalar_estimator() {
        let xs = vec![0.3, -1.2, 4.0, 0.8, 2.5, -0.1];
        let g = GradientMatrix::new(xs.clone(), 6, 1).unwrap();
        let policy = VarianceBoundPolicy::new(0.7).unwrap();
        let est = estimate_risk_gradient(&g, 0.05, &policy).unwrap();
        let v = 0.7 * xs.iter().map(|x| x * x).sum::<f64>() / 6.0;
        let p = SmoothingParams::from_moment_bound(v, 6, 0.05).unwrap();
        assert_eq!(est[0], smoothed_mean(&ScalarSample::new(xs).unwrap(), &p));
    }

    #[test]
    fn gradient_matrix_validation() {
        assert!(GradientMatrix::new(vec![], 0, 2).is_err());
        assert!(GradientMatrix::new(vec![1.0; 5], 2, 3).is_err());
        assert!(GradientMatrix::new(vec![f64::NAN, 0.0], 1, 2).is_err());
        assert!(GradientMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn step_size_examples() {
        let s = StepSchedule::decaying(1.0).unwrap();
        assert_eq!(step_size(&s, 0), 0.5);
        let s = StepSchedule::fixed(0.1, 2.0).unwrap();
        assert!((step_size(&s, 0) - 0.05).abs() < 1e-17);
        assert!((step_size(&s, 1000) - 0.05).abs() < 1e-17);
        let s = StepSchedule::decaying(0.5).unwrap();
        assert!((step_size(&s, 8) - 0.2).abs() < 1e-15);
        assert!((step_size(&StepSchedule::constant(0.01).unwrap(), 3) - 0.01).abs() < 1e-17);
        assert!(StepSchedule::fixed(1.0, 1.0).is_err());
        assert!(StepSchedule::decaying(0.0).is_err());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project(&[0.1, 0.2], &[0.0, 0.0], 1.0).unwrap(), vec![0.1, 0.2]);
        let p = project(&[3.0, 4.0], &[0.0, 0.0], 1.0).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert!(project(&[1.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn budget_steps() {
        assert_eq!(Budget::iterations(7).steps(100), 7);
        assert_eq!(Budget::evaluations(1000).steps(300), 3);
        let both = Budget {
            max_iters: Some(2),
            max_evals: Some(1000),
        };
        assert_eq!(both.steps(100), 2);
        assert!(Budget::default().validate().is_err());
        assert!(Budget::iterations(0).validate().is_err());
    }

    #[test]
    fn update_variance_bound_examples() {
        assert_eq!(update_variance_bound(500, 2, 0.0, 1.0, 3.0).unwrap(), 0.0);
        // independent 40-digit evaluation of the printed formula
        let want = 7.673_546_324_824_426_064_8e-5;
        let got = update_variance_bound(500, 2, 0.1, 1.0, 0.0).unwrap();
        assert!((got - want).abs() < 1e-18, "{got:e}");
    }
}
