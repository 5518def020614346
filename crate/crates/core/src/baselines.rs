//! Reference estimators and optimizers: sample-mean gradient descent,
//! median-of-means aggregation, geometric median, least squares, least
//! absolute deviations, SGD and SVRG.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{positive, Error, Result};
use crate::models::{LossModel, RegressionTask};
use crate::rgd::{self, batch_rows, descend, distance, norm, Ball, GdConfig, GradientMatrix, StepInfo, StepSchedule, Trajectory};
use crate::seeding;

/// Sample mean of the gradient rows.
pub fn erm_gd_step(grads: &GradientMatrix) -> Vec<f64> {
    grads.mean()
}

/// Mean gradient over all examples.
pub fn full_gradient<M: LossModel + ?Sized>(model: &M, w: &[f64]) -> Vec<f64> {
    let d = model.dim();
    let n = model.num_examples();
    let mut sum = vec![0.0; d];
    let mut g = vec![0.0; d];
    for i in 0..n {
        model.grad_into(w, i, &mut g);
        for (s, v) in sum.iter_mut().zip(&g) {
            *s += v;
        }
    }
    sum.iter().map(|s| s / n as f64).collect()
}

fn check_model<M: LossModel + ?Sized>(model: &M, w0: &[f64]) -> Result<usize> {
    if model.num_examples() == 0 {
        return Err(Error::Empty("training examples"));
    }
    if w0.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: w0.len(),
        });
    }
    Ok(model.num_examples())
}

/// Gradient descent along the (mini-batch) sample-mean gradient.
pub fn erm_gd_run<M: LossModel + ?Sized>(model: &M, config: &GdConfig, w0: &[f64]) -> Result<Trajectory> {
    config.validate()?;
    let n = check_model(model, w0)?;
    let cost = config.minibatch.map_or(n, |b| b.min(n));
    let mut rng = seeding::rng(config.seed);
    descend(w0, &config.schedule, config.projection.as_ref(), config.budget.steps(cost), cost, |_, w| {
        let rows = batch_rows(n, config.minibatch, &mut rng);
        Ok(erm_gd_step(&GradientMatrix::from_model(model, w, rows.as_deref())?))
    })
}

/// Result of [`weiszfeld`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricMedian {
    pub point: Vec<f64>,
    pub iterations: usize,
    /// `‖Σ_{pᵢ ≠ m} (m − pᵢ)/‖m − pᵢ‖‖` at the returned point.
    pub residual: f64,
    /// Number of input points coinciding with the returned point.
    pub multiplicity: usize,
}

/// `Σ_{pᵢ ≠ y} (pᵢ − y)/‖pᵢ − y‖` and the number of points equal to `y`.
fn pull_at(points: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, usize) {
    let mut pull = vec![0.0; y.len()];
    let mut multiplicity = 0;
    for p in points {
        let dist = distance(p, y);
        if dist == 0.0 {
            multiplicity += 1;
            continue;
        }
        for (acc, (a, b)) in pull.iter_mut().zip(p.iter().zip(y)) {
            *acc += (a - b) / dist;
        }
    }
    (pull, multiplicity)
}

/// Weiszfeld iteration with the Vardi–Zhang modification, started at the
/// centroid.
///
/// Stops once the first-order residual is at most `multiplicity + tol`,
/// which certifies optimality up to `tol`.
pub fn weiszfeld(points: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<GeometricMedian> {
    let first = points.first().ok_or(Error::Empty("points"))?;
    let d = first.len();
    if let Some(bad) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("points"));
    }
    let tol = positive("tol", tol)?;
    // a data point is optimal when the pull of the others is at most its
    // multiplicity; Weiszfeld only approaches such points sublinearly
    for p in points {
        let (pull, multiplicity) = pull_at(points, p);
        let r = norm(&pull);
        if r <= multiplicity as f64 + tol {
            return Ok(GeometricMedian {
                point: p.clone(),
                iterations: 0,
                residual: r,
                multiplicity,
            });
        }
    }
    let count = points.len() as f64;
    let mut y: Vec<f64> = (0..d)
        .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / count)
        .collect();
    let mut last_residual = f64::INFINITY;
    for iteration in 0..=max_iter {
        let mut weight_sum = 0.0;
        let mut weighted = vec![0.0; d];
        let mut pull = vec![0.0; d];
        let mut multiplicity = 0usize;
        for p in points {
            let dist = distance(p, &y);
            if dist == 0.0 {
                multiplicity += 1;
                continue;
            }
            weight_sum += 1.0 / dist;
            for j in 0..d {
                weighted[j] += p[j] / dist;
                pull[j] += (p[j] - y[j]) / dist;
            }
        }
        let r = norm(&pull);
        last_residual = r;
        if r <= multiplicity as f64 + tol {
            return Ok(GeometricMedian {
                point: y,
                iterations: iteration,
                residual: r,
                multiplicity,
            });
        }
        if iteration == max_iter {
            break;
        }
        let eta = multiplicity as f64;
        let blend = (1.0 - eta / r).max(0.0);
        let keep = (eta / r).min(1.0);
        let next: Vec<f64> = (0..d)
            .map(|j| blend * weighted[j] / weight_sum + keep * y[j])
            .collect();
        if next == y {
            // no representable progress; the residual is the best attainable
            return Ok(GeometricMedian {
                point: y,
                iterations: iteration,
                residual: r,
                multiplicity,
            });
        }
        y = next;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: last_residual,
    })
}

pub const GEOMED_MAX_ITER: usize = 100_000;

/// Geometric median with residual tolerance `1e-9 · #points`.
pub fn geometric_median(points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let tol = 1e-9 * points.len().max(1) as f64;
    weiszfeld(points, tol, GEOMED_MAX_ITER).map(|m| m.point)
}

/// Assignment of `n` examples to `k` disjoint, non-empty subsets: a seeded
/// shuffle followed by contiguous blocks whose sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionScheme {
    blocks: Vec<Vec<usize>>,
}

impl PartitionScheme {
    pub fn seeded(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidParameter {
                name: "k",
                value: k as f64,
                reason: "need 1 <= k <= n",
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seeding::rng(seed));
        Ok(Self::contiguous(&order, k))
    }

    fn contiguous(order: &[usize], k: usize) -> Self {
        let n = order.len();
        let blocks = (0..k)
            .map(|b| order[b * n / k..(b + 1) * n / k].to_vec())
            .collect();
        Self { blocks }
    }

    /// Explicit blocks; must be non-empty, disjoint and cover `0..n`.
    pub fn from_blocks(blocks: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for b in &blocks {
            if b.is_empty() {
                return Err(Error::Empty("partition block"));
            }
            for &i in b {
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i, len: n });
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Config(format!("example {i} assigned twice")));
                }
            }
        }
        if blocks.is_empty() || seen.iter().any(|s| !s) {
            return Err(Error::Config("partition does not cover every example".into()));
        }
        Ok(Self { blocks })
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Block index of each example.
    pub fn assignment(&self) -> Vec<usize> {
        let n = self.blocks.iter().map(Vec::len).sum();
        let mut out = vec![0; n];
        for (b, rows) in self.blocks.iter().enumerate() {
            for &i in rows {
                out[i] = b;
            }
        }
        out
    }
}

/// Geometric median of the block means of `grads` under `partition`.
pub fn mom_gradient_with(grads: &GradientMatrix, partition: &PartitionScheme) -> Result<Vec<f64>> {
    let n = grads.num_rows();
    let covered: usize = partition.blocks().iter().map(Vec::len).sum();
    if covered != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: covered,
        });
    }
    let d = grads.dim();
    let means: Vec<Vec<f64>> = partition
        .blocks()
        .iter()
        .map(|rows| {
            let mut m = vec![0.0; d];
            for &i in rows {
                for (mj, g) in m.iter_mut().zip(grads.row(i)) {
                    *mj += g;
                }
            }
            m.iter().map(|v| v / rows.len() as f64).collect()
        })
        .collect();
    geometric_median(&means)
}

/// Median-of-means gradient with `k` blocks from a seeded partition.
pub fn mom_gradient(grads: &GradientMatrix, k: usize, seed: u64) -> Result<Vec<f64>> {
    let partition = PartitionScheme::seeded(grads.num_rows(), k, seed)?;
    mom_gradient_with(grads, &partition)
}

/// Gradient descent along the median-of-means gradient, re-partitioning
/// at every step.
pub fn mom_gd_run<M: LossModel + ?Sized>(model: &M, k: usize, config: &GdConfig, w0: &[f64]) -> Result<Trajectory> {
    config.validate()?;
    let n = check_model(model, w0)?;
    let cost = config.minibatch.map_or(n, |b| b.min(n));
    if k == 0 || k > cost {
        return Err(Error::InvalidParameter {
            name: "k",
            value: k as f64,
            reason: "need 1 <= k <= examples per step",
        });
    }
    let mut rng = seeding::rng(config.seed);
    descend(w0, &config.schedule, config.projection.as_ref(), config.budget.steps(cost), cost, |_, w| {
        let rows = batch_rows(n, config.minibatch, &mut rng);
        let grads = GradientMatrix::from_model(model, w, rows.as_deref())?;
        mom_gradient(&grads, k, rng.random())
    })
}

/// Minimum-norm least-squares solution of `x·w ≈ y` through the SVD.
pub fn min_norm_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return DVector::zeros(d);
    }
    let svd = x.clone().svd(true, true);
    let cutoff = n.max(d) as f64 * f64::EPSILON * svd.singular_values.max();
    svd.solve(y, cutoff).expect("both factors computed").column(0).into_owned()
}

/// Analytic minimum-norm least-squares fit.
pub fn ols_analytic(task: &RegressionTask) -> Vec<f64> {
    let y = DVector::from_column_slice(task.responses());
    min_norm_least_squares(&task.design_matrix(), &y).iter().copied().collect()
}

/// Partition count `max{2, ⌊n/(2d)⌋}`, capped at `n`.
pub fn geomed_partitions(n: usize, d: usize) -> usize {
    (n / (2 * d.max(1))).max(2).min(n.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeomedOls {
    pub estimate: Vec<f64>,
    pub partitions: usize,
    /// Blocks with fewer rows than features (minimum-norm solutions).
    pub degenerate_blocks: Vec<usize>,
}

/// Geometric median of per-block least-squares fits.
pub fn geomed_of_ols(task: &RegressionTask, seed: u64) -> Result<GeomedOls> {
    let n = task.num_examples();
    let d = task.dim();
    if n == 0 {
        return Err(Error::Empty("training examples"));
    }
    let k = geomed_partitions(n, d);
    let partition = PartitionScheme::seeded(n, k, seed)?;
    let mut degenerate_blocks = Vec::new();
    let fits: Vec<Vec<f64>> = partition
        .blocks()
        .iter()
        .enumerate()
        .map(|(b, rows)| {
            if rows.len() < d {
                degenerate_blocks.push(b);
            }
            ols_analytic(&task.subset(rows))
        })
        .collect();
    Ok(GeomedOls {
        estimate: geometric_median(&fits)?,
        partitions: k,
        degenerate_blocks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadConfig {
    pub max_iters: usize,
    /// Step at iteration `t` is `step0/√(t + 1)`.
    pub step0: f64,
}

impl Default for LadConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            step0: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadFit {
    pub w: Vec<f64>,
    pub objective: f64,
    pub initial_objective: f64,
}

/// Least absolute deviations by subgradient descent from the OLS fit,
/// returning the best iterate seen.
pub fn lad_fit(task: &RegressionTask, config: &LadConfig) -> Result<LadFit> {
    let n = task.num_examples();
    if n == 0 {
        return Err(Error::Empty("training examples"));
    }
    let step0 = positive("step0", config.step0)?;
    let d = task.dim();
    let mut w = ols_analytic(task);
    let initial_objective = task.mean_absolute_residual(&w);
    let mut best = (initial_objective, w.clone());
    for t in 0..config.max_iters {
        let mut g = vec![0.0; d];
        for i in 0..n {
            let r = task.residual(&w, i);
            let sign = if r > 0.0 {
                1.0
            } else if r < 0.0 {
                -1.0
            } else {
                0.0
            };
            for (gj, xj) in g.iter_mut().zip(task.input(i)) {
                *gj += sign * xj / n as f64;
            }
        }
        let eta = step0 / ((t + 1) as f64).sqrt();
        for (wj, gj) in w.iter_mut().zip(&g) {
            *wj -= eta * gj;
        }
        let obj = task.mean_absolute_residual(&w);
        if obj < best.0 {
            best = (obj, w.clone());
        }
    }
    Ok(LadFit {
        w: best.1,
        objective: best.0,
        initial_objective,
    })
}

/// Settings for [`sgd_run`] and [`svrg_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticConfig {
    pub schedule: StepSchedule,
    pub budget: rgd::Budget,
    pub projection: Option<Ball>,
    pub seed: u64,
    /// Keep every `record_every`-th iterate (and the last).
    pub record_every: usize,
    /// SVRG inner-loop length; `n/2` when unset.
    pub inner_steps: Option<usize>,
}

impl StochasticConfig {
    pub fn new(schedule: StepSchedule, budget: rgd::Budget) -> Self {
        Self {
            schedule,
            budget,
            projection: None,
            seed: 0,
            record_every: 1,
            inner_steps: None,
        }
    }

    fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.budget.validate()?;
        if self.record_every == 0 || self.inner_steps == Some(0) {
            return Err(Error::Config("record_every and inner_steps must be positive".into()));
        }
        Ok(())
    }
}

struct Stepper<'a> {
    config: &'a StochasticConfig,
    traj: Trajectory,
    w: Vec<f64>,
    t: usize,
    evals: usize,
}

impl<'a> Stepper<'a> {
    fn new(config: &'a StochasticConfig, w0: &[f64]) -> Self {
        Self {
            config,
            traj: Trajectory::start(w0),
            w: w0.to_vec(),
            t: 0,
            evals: 0,
        }
    }

    fn apply(&mut self, g: &[f64], cost: usize) -> Result<()> {
        let eta = rgd::step_size(&self.config.schedule, self.t);
        for (wj, gj) in self.w.iter_mut().zip(g) {
            *wj -= eta * gj;
        }
        if let Some(ball) = &self.config.projection {
            self.w = ball.project(&self.w);
        }
        if self.w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("iterate"));
        }
        self.t += 1;
        self.evals += cost;
        self.traj.steps.push(StepInfo {
            step_size: eta,
            direction_norm: norm(g),
            evals: self.evals,
        });
        if self.t.is_multiple_of(self.config.record_every) {
            self.traj.record(self.t, &self.w);
        }
        Ok(())
    }

    fn finish(mut self) -> Result<Trajectory> {
        if self.t == 0 {
            return Err(Error::InvalidParameter {
                name: "budget",
                value: 0.0,
                reason: "does not cover a single step",
            });
        }
        if self.traj.iterations.last() != Some(&self.t) {
            self.traj.record(self.t, &self.w);
        }
        Ok(self.traj)
    }
}

/// Plain SGD: one example, drawn with replacement, per step.
pub fn sgd_run<M: LossModel + ?Sized>(model: &M, config: &StochasticConfig, w0: &[f64]) -> Result<Trajectory> {
    config.validate()?;
    let n = check_model(model, w0)?;
    let mut rng = seeding::rng(config.seed);
    let mut g = vec![0.0; model.dim()];
    let mut run = Stepper::new(config, w0);
    while config.budget.allows(run.t, run.evals, 1) {
        let i = rng.random_range(0..n);
        model.grad_into(&run.w, i, &mut g);
        run.apply(&g, 1)?;
    }
    run.finish()
}

/// SVRG: a full-gradient anchor (`n` evaluations) followed by an inner loop
/// of single-example corrected steps (2 evaluations each).
pub fn svrg_run<M: LossModel + ?Sized>(model: &M, config: &StochasticConfig, w0: &[f64]) -> Result<Trajectory> {
    config.validate()?;
    let n = check_model(model, w0)?;
    let d = model.dim();
    let inner = config.inner_steps.unwrap_or((n / 2).max(1));
    let mut rng = seeding::rng(config.seed);
    let (mut g_now, mut g_anchor, mut g) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut run = Stepper::new(config, w0);
    'outer: while config.max_evals_allow(run.evals, n + 2) && config.budget.allows(run.t, 0, 0) {
        let anchor = run.w.clone();
        let mu = full_gradient(model, &anchor);
        run.evals += n;
        for _ in 0..inner {
            if !config.budget.allows(run.t, run.evals, 2) {
                break 'outer;
            }
            let i = rng.random_range(0..n);
            model.grad_into(&run.w, i, &mut g_now);
            model.grad_into(&anchor, i, &mut g_anchor);
            for j in 0..d {
                g[j] = g_now[j] - g_anchor[j] + mu[j];
            }
            run.apply(&g, 2)?;
        }
    }
    run.finish()
}

impl StochasticConfig {
    fn max_evals_allow(&self, used: usize, cost: usize) -> bool {
        self.budget.max_evals.is_none_or(|e| used + cost <= e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erm_step_examples() {
        let g = GradientMatrix::from_rows(&[vec![1.5, -2.0]]).unwrap();
        assert_eq!(erm_gd_step(&g), vec![1.5, -2.0]);
        let g = GradientMatrix::from_rows(&[vec![1.0, -3.0], vec![-1.0, 3.0]]).unwrap();
        assert_eq!(erm_gd_step(&g), vec![0.0, 0.0]);
    }

    #[test]
    fn geometric_median_examples() {
        let one = vec![vec![2.0, -1.0]];
        assert_eq!(geometric_median(&one).unwrap(), vec![2.0, -1.0]);
        let line = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        let m = geometric_median(&line).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-9 && (m[1] - 1.0).abs() < 1e-9, "{m:?}");
        // a repeated point holding the majority is the median
        let heavy = vec![vec![0.0], vec![0.0], vec![0.0], vec![5.0], vec![-1.0]];
        assert_eq!(geometric_median(&heavy).unwrap(), vec![0.0]);
        assert!(geometric_median(&[]).is_err());
    }

    #[test]
    fn weiszfeld_reports_non_convergence() {
        let pts = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, 7.0], vec![9.0, 8.0]];
        match weiszfeld(&pts, 1e-12, 1) {
            Err(Error::NonConvergence { iterations: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn partition_is_disjoint_cover() {
        let p = PartitionScheme::seeded(23, 5, 4).unwrap();
        let mut all: Vec<usize> = p.blocks().concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(p.blocks().iter().all(|b| b.len() == 4 || b.len() == 5));
        assert!(PartitionScheme::seeded(3, 4, 0).is_err());
        assert!(PartitionScheme::from_blocks(vec![vec![0], vec![0, 1]], 2).is_err());
    }

    #[test]
    fn mom_examples() {
        let rows: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
        let g = GradientMatrix::from_rows(&rows).unwrap();
        let m = mom_gradient(&g, 1, 3).unwrap();
        let mean = g.mean();
        assert!(m.iter().zip(&mean).all(|(a, b)| (a - b).abs() < 1e-12));
        let m = mom_gradient(&g, 9, 3).unwrap();
        let gm = geometric_median(&rows).unwrap();
        assert!(m.iter().zip(&gm).all(|(a, b)| (a - b).abs() < 1e-9));
        assert!(mom_gradient(&g, 10, 3).is_err());
    }

    #[test]
    fn partition_counts() {
        assert_eq!(geomed_partitions(60, 5), 6);
        assert_eq!(geomed_partitions(10, 5), 2);
        assert_eq!(geomed_partitions(500, 2), 125);
    }

    fn exact_task(n: usize, d: usize, w: &[f64]) -> RegressionTask {
        let mut rng = seeding::rng(99);
        let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = (0..n)
            .map(|i| x[i * d..(i + 1) * d].iter().zip(w).map(|(a, b)| a * b).sum())
            .collect();
        RegressionTask::new(x, y, d).unwrap()
    }

    #[test]
    fn ols_recovers_exact_linear_data() {
        let w = [0.5, -1.0, 2.0];
        let t = exact_task(20, 3, &w);
        let fit = ols_analytic(&t);
        assert!(fit.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-10));
        let g = geomed_of_ols(&t, 1).unwrap();
        assert!(g.estimate.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-8), "{g:?}");
    }

    #[test]
    fn ols_minimum_norm_when_underdetermined() {
        // one equation w0 + w1 = 2: minimum-norm solution is (1, 1)
        let t = RegressionTask::new(vec![1.0, 1.0], vec![2.0], 2).unwrap();
        let fit = ols_analytic(&t);
        assert!((fit[0] - 1.0).abs() < 1e-12 && (fit[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geomed_flags_degenerate_blocks() {
        let t = exact_task(10, 5, &[1.0; 5]);
        let g = geomed_of_ols(&t, 0).unwrap();
        assert_eq!(g.partitions, 2);
        assert!(g.degenerate_blocks.is_empty());
        let t = exact_task(7, 5, &[1.0; 5]);
        assert_eq!(geomed_of_ols(&t, 0).unwrap().degenerate_blocks.len(), 2);
    }

    #[test]
    fn lad_intercept_approaches_median() {
        let y = vec![0.0, 0.1, 0.2, 0.3, 5.0, 9.0, 40.0];
        let t = RegressionTask::new(vec![1.0; 7], y, 1).unwrap();
        let fit = lad_fit(&t, &LadConfig { max_iters: 5000, step0: 1.0 }).unwrap();
        let oracle = t.mean_absolute_residual(&[0.3]);
        assert!(fit.objective <= fit.initial_objective);
        assert!(fit.objective - oracle < 1e-3, "{} vs {}", fit.objective, oracle);
    }

    #[test]
    fn lad_zero_noise() {
        let w = [1.0, -0.5];
        let t = exact_task(40, 2, &w);
        let fit = lad_fit(&t, &LadConfig::default()).unwrap();
        assert!(fit.w.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-8));
    }

    #[test]
    fn stochastic_runs_respect_budget_and_seed() {
        let w = [1.0, -0.5];
        let t = exact_task(40, 2, &w);
        let mut cfg = StochasticConfig::new(StepSchedule::constant(0.05).unwrap(), rgd::Budget::evaluations(400));
        cfg.seed = 5;
        let a = sgd_run(&t, &cfg, &[0.0, 0.0]).unwrap();
        let b = sgd_run(&t, &cfg, &[0.0, 0.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.evaluations(), 400);
        assert!(distance(a.final_iterate(), &w) < distance(&[0.0, 0.0], &w));

        let s = svrg_run(&t, &cfg, &[0.0, 0.0]).unwrap();
        assert!(s.evaluations() <= 400);
        // each epoch costs 40 + 20·2 evaluations
        assert_eq!(s.num_steps(), 100);
        assert!(distance(s.final_iterate(), &w) < distance(&[0.0, 0.0], &w));
    }

    #[test]
    fn svrg_anchor_is_erm_step() {
        let t = exact_task(15, 3, &[0.2, 0.4, -0.1]);
        let w = [0.3, 0.3, 0.3];
        let a = full_gradient(&t, &w);
        let b = erm_gd_step(&GradientMatrix::from_model(&t, &w, None).unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-15));
    }
}
