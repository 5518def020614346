//! Trial orchestration and result persistence.
//!
//! Every `(method, trial)` cell runs independently in a worker pool. Each
//! trial's data is generated from a seed derived from `(root, trial)`, so
//! all methods in a trial see the same sample, and each method's own
//! randomness comes from `(root, label, trial)`. Finished cells are handed
//! to a single writer that emits them in canonical order (methods in config
//! order, then trials), so the CSV does not depend on scheduling.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{ExperimentConfig, MethodConfig, MethodKind, ScheduleKind, TaskConfig};
use super::dataset::{balanced_subsample, load_csv_dataset, DatasetFile, DatasetSchema};
use crate::baselines::{self, LadConfig, StochasticConfig};
use crate::error::{Error, Result};
use crate::models::{LogisticTask, LossModel, QuadraticRiskTask, RegressionTask};
use crate::rgd::{self, distance, Budget, GdConfig, RgdConfig, StepSchedule, Trajectory, VarianceBoundPolicy};
use crate::seeding;
use crate::synth::{self, IterationMetrics, NoiseSpec, TrialRecord};

pub const RESULTS_FILE: &str = "results.csv";
pub const META_FILE: &str = "meta.json";
pub const CSV_COLUMNS: [&str; 8] = [
    "experiment",
    "method",
    "trial",
    "iteration",
    "excess_emp_risk",
    "excess_true_risk",
    "dist_to_wstar",
    "test_metric",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    /// Directory receiving `results.csv` and `meta.json`.
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellFailure {
    pub method: String,
    pub trial: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct RunSummary {
    pub cells_total: usize,
    pub cells_computed: usize,
    pub cells_resumed: usize,
    pub failures: Vec<CellFailure>,
}

type Row = [String; 8];

fn fmt_metric(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV rows of one record, one per recorded iteration.
pub fn record_rows(record: &TrialRecord) -> Vec<Row> {
    record
        .metrics
        .iter()
        .map(|m| {
            [
                record.experiment.clone(),
                record.method.clone(),
                record.trial.to_string(),
                m.iteration.to_string(),
                fmt_metric(m.excess_emp_risk),
                fmt_metric(m.excess_true_risk),
                fmt_metric(m.dist_to_wstar),
                fmt_metric(m.test_metric),
            ]
        })
        .collect()
}

/// Parses a results file back into records, in file order.
pub fn read_results(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    check_header(reader.headers()?)?;
    let mut out: Vec<TrialRecord> = Vec::new();
    for row in reader.records() {
        let row = row?;
        let parse_opt = |k: usize| -> Result<Option<f64>> {
            let cell = &row[k];
            if cell.is_empty() {
                Ok(None)
            } else {
                cell.parse()
                    .map(Some)
                    .map_err(|_| Error::Config(format!("bad metric {cell:?} in column {}", CSV_COLUMNS[k])))
            }
        };
        let parse_int = |k: usize| -> Result<usize> {
            row[k]
                .parse()
                .map_err(|_| Error::Config(format!("bad integer {:?} in column {}", &row[k], CSV_COLUMNS[k])))
        };
        let trial = parse_int(2)?;
        let metrics = IterationMetrics {
            iteration: parse_int(3)?,
            excess_emp_risk: parse_opt(4)?,
            excess_true_risk: parse_opt(5)?,
            dist_to_wstar: parse_opt(6)?,
            test_metric: parse_opt(7)?,
        };
        match out.last_mut() {
            Some(last) if last.method == row[1] && last.trial == trial => last.metrics.push(metrics),
            _ => out.push(TrialRecord {
                experiment: row[0].to_owned(),
                method: row[1].to_owned(),
                trial,
                seed: 0,
                metrics: vec![metrics],
            }),
        }
    }
    Ok(out)
}

fn check_header(header: &csv::StringRecord) -> Result<()> {
    if header.iter().eq(CSV_COLUMNS) {
        Ok(())
    } else {
        Err(Error::Config(format!("unexpected results header {header:?}")))
    }
}

/// Complete cells of an earlier run, keyed by `(method, trial)`.
/// Cells already on disk. An interrupted `.partial` file may end inside a
/// cell, so its last cell is recomputed unless `complete` is set.
fn existing_cells(path: &Path, complete: bool) -> Result<HashMap<(String, usize), Vec<Row>>> {
    let mut cells: HashMap<(String, usize), Vec<Row>> = HashMap::new();
    let mut last = None;
    if !path.exists() {
        return Ok(cells);
    }
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    check_header(reader.headers()?)?;
    for rec in reader.records() {
        let Ok(rec) = rec else { break };
        // a torn final line from an interrupted write is discarded
        if rec.len() != CSV_COLUMNS.len() {
            break;
        }
        let Ok(trial) = rec[2].parse::<usize>() else { break };
        let row: Row = std::array::from_fn(|k| rec[k].to_owned());
        let key = (row[1].clone(), trial);
        last = Some(key.clone());
        cells.entry(key).or_default().push(row);
    }
    if !complete {
        if let Some(key) = last {
            cells.remove(&key);
        }
    }
    Ok(cells)
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Everything a cell needs that is shared across trials.
enum Prepared {
    Controlled(NoiseSpec),
    Regression(NoiseSpec),
    Classify(DatasetFile),
}

fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let as_config = |e: Error| Error::Config(e.to_string());
    Ok(match &config.task {
        TaskConfig::Controlled { noise, .. } => Prepared::Controlled(noise.resolve().map_err(as_config)?),
        TaskConfig::Regression { noise, .. } => Prepared::Regression(noise.resolve().map_err(as_config)?),
        TaskConfig::Classify {
            dataset, label_column, ..
        } => Prepared::Classify(load_csv_dataset(dataset, &DatasetSchema::new(label_column.clone())).map_err(as_config)?),
    })
}

/// Runs every `(method, trial)` cell missing from `opts.out_dir`.
///
/// Cell failures are recorded in the manifest and do not stop the run.
/// Re-running with the same configuration and seed computes nothing new;
/// a different configuration in the same directory is a config error.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    config.validate()?;
    let started = unix_now();
    let clock = Instant::now();
    let prepared = prepare(config)?;
    fs::create_dir_all(&opts.out_dir)?;
    let results_path = opts.out_dir.join(RESULTS_FILE);
    let partial_path = opts.out_dir.join(format!("{RESULTS_FILE}.partial"));
    let meta_path = opts.out_dir.join(META_FILE);
    let fingerprint = config.fingerprint(opts.seed);

    let mut done = HashMap::new();
    for (path, complete) in [(&results_path, true), (&partial_path, false)] {
        if path.exists() {
            let previous = fs::read_to_string(&meta_path)
                .ok()
                .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
                .and_then(|m| m.get("fingerprint").and_then(|f| f.as_str()).map(str::to_owned));
            if previous.as_deref() != Some(fingerprint.as_str()) {
                return Err(Error::Config(format!(
                    "{} holds results from a different configuration or seed",
                    opts.out_dir.display()
                )));
            }
            done.extend(existing_cells(path, complete)?);
        }
    }

    let cells: Vec<(usize, usize)> = (0..config.methods.len())
        .flat_map(|m| (0..config.trials).map(move |t| (m, t)))
        .collect();
    let mut summary = RunSummary {
        cells_total: cells.len(),
        ..RunSummary::default()
    };
    let todo: Vec<usize> = (0..cells.len())
        .filter(|&c| {
            let (m, t) = cells[c];
            !done.contains_key(&(config.methods[m].label().to_owned(), t))
        })
        .collect();
    summary.cells_resumed = cells.len() - todo.len();
    info!(
        "{}: {} cells, {} already present",
        config.kind(),
        summary.cells_total,
        summary.cells_resumed
    );
    let mut meta = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": config.kind().name(),
        "seed": opts.seed,
        "threads": opts.threads,
        "fingerprint": fingerprint,
        "columns": CSV_COLUMNS,
        "defaults": {
            "delta": config.delta,
            "variance_multiplier": config.variance_multiplier,
            "step": config.step,
        },
        "config": config,
        "noise": match &prepared {
            Prepared::Controlled(s) | Prepared::Regression(s) => serde_json::to_value(s)?,
            Prepared::Classify(_) => serde_json::Value::Null,
        },
        "noise_level_sd": (1..=synth::NUM_LEVELS).map(|l| synth::level_sd(l).expect("valid level")).collect::<Vec<_>>(),
        "started_unix": started,
        "status": "running",
    });
    write_json(&meta_path, &meta)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let (tx, rx) = mpsc::channel::<(usize, Result<TrialRecord>)>();

    let mut writer = csv::WriterBuilder::new().from_writer(BufWriter::new(File::create(&partial_path)?));
    writer.write_record(CSV_COLUMNS)?;
    let mut pending: BTreeMap<usize, Option<Vec<Row>>> = BTreeMap::new();
    for (c, &(m, t)) in cells.iter().enumerate() {
        if let Some(rows) = done.remove(&(config.methods[m].label().to_owned(), t)) {
            pending.insert(c, Some(rows));
        }
    }
    let mut next = 0;
    let mut flush_ready = |pending: &mut BTreeMap<usize, Option<Vec<Row>>>, writer: &mut csv::Writer<BufWriter<File>>| -> Result<()> {
        while let Some(entry) = pending.remove(&next) {
            for row in entry.into_iter().flatten() {
                writer.write_record(&row)?;
            }
            next += 1;
        }
        writer.flush()?;
        Ok(())
    };
    flush_ready(&mut pending, &mut writer)?;

    std::thread::scope(|scope| -> Result<()> {
        let prepared = &prepared;
        let cells = &cells;
        let todo = &todo;
        scope.spawn(move || {
            pool.install(|| {
                todo.par_iter().for_each_with(tx, |tx, &c| {
                    let (m, t) = cells[c];
                    let outcome = run_cell(config, prepared, &config.methods[m], t, opts.seed);
                    let _ = tx.send((c, outcome));
                });
            });
        });
        for (c, outcome) in rx {
            let (m, t) = cells[c];
            let label = config.methods[m].label().to_owned();
            match outcome {
                Ok(record) => {
                    summary.cells_computed += 1;
                    pending.insert(c, Some(record_rows(&record)));
                }
                Err(e) => {
                    warn!("{label} trial {t} failed: {e}");
                    summary.failures.push(CellFailure {
                        method: label,
                        trial: t,
                        error: e.to_string(),
                    });
                    pending.insert(c, None);
                }
            }
            flush_ready(&mut pending, &mut writer)?;
        }
        Ok(())
    })?;
    drop(writer);
    fs::rename(&partial_path, &results_path)?;

    summary.failures.sort_by(|a, b| (&a.method, a.trial).cmp(&(&b.method, b.trial)));
    meta["status"] = json!("complete");
    meta["finished_unix"] = json!(unix_now());
    meta["elapsed_seconds"] = json!(clock.elapsed().as_secs_f64());
    meta["cells"] = serde_json::to_value(&summary)?;
    write_json(&meta_path, &meta)?;
    Ok(summary)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Seed of the data shared by all methods in trial `trial`.
pub fn trial_seed(root: u64, trial: usize) -> u64 {
    seeding::derive(root, &[trial as u64])
}

/// Seed of method `label`'s own randomness in trial `trial`.
pub fn method_seed(root: u64, label: &str, trial: usize) -> u64 {
    seeding::derive_labeled(root, label, &[trial as u64])
}

fn run_cell(config: &ExperimentConfig, prepared: &Prepared, method: &MethodConfig, trial: usize, root: u64) -> Result<TrialRecord> {
    let data_seed = trial_seed(root, trial);
    let seed = method_seed(root, method.label(), trial);
    let metrics = match (&config.task, prepared) {
        (TaskConfig::Controlled { .. }, Prepared::Controlled(noise)) => controlled_cell(config, noise, method, data_seed, seed)?,
        (TaskConfig::Regression { .. }, Prepared::Regression(noise)) => regression_cell(config, noise, method, data_seed, seed)?,
        (TaskConfig::Classify { .. }, Prepared::Classify(data)) => classify_cell(config, data, method, data_seed, seed)?,
        _ => unreachable!("prepared from the same task"),
    };
    Ok(TrialRecord {
        experiment: config.kind().name().to_owned(),
        method: method.label().to_owned(),
        trial,
        seed,
        metrics,
    })
}

/// Shared iterative-method settings for one cell.
struct Plan {
    schedule: StepSchedule,
    budget: Budget,
    /// Budget for single-example methods.
    stochastic_budget: Budget,
    record_every: usize,
}

fn step_schedule(step: Option<f64>, default: StepSchedule) -> Result<StepSchedule> {
    step.map_or(Ok(default), StepSchedule::constant)
}

fn iterative_run<M: LossModel + ?Sized>(
    config: &ExperimentConfig,
    model: &M,
    method: &MethodKind,
    plan: &Plan,
    w0: &[f64],
    seed: u64,
) -> Result<Trajectory> {
    let gd = |step: Option<f64>, minibatch: Option<usize>| -> Result<GdConfig> {
        Ok(GdConfig {
            schedule: step_schedule(step, plan.schedule)?,
            budget: plan.budget,
            projection: None,
            minibatch,
            seed,
        })
    };
    let stochastic = |step: Option<f64>| -> Result<StochasticConfig> {
        let mut c = StochasticConfig::new(step_schedule(step, plan.schedule)?, plan.stochastic_budget);
        c.seed = seed;
        c.record_every = plan.record_every;
        Ok(c)
    };
    match method {
        MethodKind::Erm { step, minibatch } => baselines::erm_gd_run(model, &gd(*step, *minibatch)?, w0),
        MethodKind::Rgdmult {
            step,
            multiplier,
            minibatch,
            coord_subset,
        } => {
            let g = gd(*step, *minibatch)?;
            let cfg = RgdConfig {
                delta: config.delta,
                schedule: g.schedule,
                policy: VarianceBoundPolicy::new(multiplier.unwrap_or(config.variance_multiplier))?,
                budget: g.budget,
                projection: None,
                minibatch: *minibatch,
                coord_subset: *coord_subset,
                seed,
            };
            rgd::rgd_run(model, &cfg, w0)
        }
        MethodKind::Mom { k, step } => baselines::mom_gd_run(model, *k, &gd(*step, None)?, w0),
        MethodKind::Sgd { step } => baselines::sgd_run(model, &stochastic(*step)?, w0),
        MethodKind::Svrg { step } => baselines::svrg_run(model, &stochastic(*step)?, w0),
        MethodKind::Oracle | MethodKind::Ols | MethodKind::Lad { .. } | MethodKind::Geomed => {
            Err(Error::Config(format!("{} is not an iterative method here", method.name())))
        }
    }
}

/// Keeps iterations divisible by `every`, plus the last one.
fn thinned(traj: &Trajectory, every: usize) -> impl Iterator<Item = (usize, &[f64])> {
    let last = traj.iterations.last().copied();
    traj.iterations
        .iter()
        .zip(&traj.iterates)
        .filter(move |(t, _)| **t % every == 0 || Some(**t) == last)
        .map(|(t, w)| (*t, w.as_slice()))
}

fn controlled_cell(config: &ExperimentConfig, noise: &NoiseSpec, method: &MethodConfig, data_seed: u64, seed: u64) -> Result<Vec<IterationMetrics>> {
    let TaskConfig::Controlled {
        n,
        d,
        iterations,
        alpha,
        schedule,
        init_radius,
        input_variance,
        ..
    } = &config.task
    else {
        unreachable!()
    };
    let task = synth::gen_noisy_quadratic_scaled(*n, *d, noise, *input_variance, data_seed)?;
    let w0 = rgd::init_around(task.w_star(), *init_radius, seeding::derive(data_seed, &[1]));
    let lambda_bar = task.lambda_bar();
    let plan = Plan {
        schedule: match schedule {
            ScheduleKind::Fixed => StepSchedule::fixed(*alpha, lambda_bar)?,
            ScheduleKind::Decaying => StepSchedule::decaying(lambda_bar)?,
        },
        budget: Budget::iterations(*iterations),
        stochastic_budget: Budget::evaluations(iterations * n),
        record_every: *n,
    };
    let traj = match &method.kind {
        MethodKind::Oracle => rgd::oracle_run(&task, &plan.schedule, *iterations, None, &w0)?,
        kind => iterative_run(config, &task, kind, &plan, &w0, seed)?,
    };
    let emp_min = task.empirical_risk(&task.empirical_minimizer());
    Ok(thinned(&traj, 1)
        .map(|(t, w)| controlled_metrics(&task, emp_min, t, w))
        .collect())
}

fn controlled_metrics(task: &QuadraticRiskTask, emp_min: f64, t: usize, w: &[f64]) -> IterationMetrics {
    IterationMetrics {
        iteration: t,
        excess_emp_risk: Some(task.empirical_risk(w) - emp_min),
        excess_true_risk: Some(task.excess_risk(w)),
        dist_to_wstar: Some(distance(w, task.w_star())),
        test_metric: None,
    }
}

fn regression_metrics(train: &RegressionTask, test: &RegressionTask, emp_min: f64, t: usize, w: &[f64]) -> IterationMetrics {
    let w_star = train.w_star().expect("synthetic task");
    let dist = distance(w, w_star);
    IterationMetrics {
        iteration: t,
        excess_emp_risk: Some(train.empirical_risk(w) - emp_min),
        // unit input covariance: E(⟨w, x⟩ − y)² − E ε² = ‖w − w*‖²
        excess_true_risk: Some(dist * dist),
        dist_to_wstar: Some(dist),
        test_metric: Some(synth::excess_test_rmse(w, w_star, test)),
    }
}

fn regression_cell(config: &ExperimentConfig, noise: &NoiseSpec, method: &MethodConfig, data_seed: u64, seed: u64) -> Result<Vec<IterationMetrics>> {
    let TaskConfig::Regression {
        n,
        d,
        test_size,
        budget_multiplier,
        record_every,
        ..
    } = &config.task
    else {
        unreachable!()
    };
    let (train, test) = synth::gen_regression(*n, *d, noise, *test_size, data_seed)?;
    let ols = baselines::ols_analytic(&train);
    let emp_min = train.empirical_risk(&ols);
    let evals = ((*budget_multiplier * *n as f64).floor() as usize).max(1);
    let single = |w: &[f64]| vec![regression_metrics(&train, &test, emp_min, 0, w)];
    match &method.kind {
        MethodKind::Ols => Ok(single(&ols)),
        MethodKind::Geomed => Ok(single(&baselines::geomed_of_ols(&train, seed)?.estimate)),
        MethodKind::Lad { step0 } => {
            let cfg = LadConfig {
                max_iters: (evals / n).max(1),
                step0: step0.unwrap_or(LadConfig::default().step0),
            };
            Ok(single(&baselines::lad_fit(&train, &cfg)?.w))
        }
        kind => {
            let plan = Plan {
                schedule: StepSchedule::constant(config.step)?,
                budget: Budget::evaluations(evals),
                stochastic_budget: Budget::evaluations(evals),
                record_every: *record_every,
            };
            let traj = iterative_run(config, &train, kind, &plan, &ols, seed)?;
            let every = if matches!(kind, MethodKind::Sgd { .. } | MethodKind::Svrg { .. }) { 1 } else { *record_every };
            Ok(thinned(&traj, every)
                .map(|(t, w)| regression_metrics(&train, &test, emp_min, t, w))
                .collect())
        }
    }
}

fn classify_cell(config: &ExperimentConfig, data: &DatasetFile, method: &MethodConfig, data_seed: u64, seed: u64) -> Result<Vec<IterationMetrics>> {
    let TaskConfig::Classify {
        train_per_class,
        test_per_class,
        reg,
        budget_multiplier,
        init_box,
        record_every,
        ..
    } = &config.task
    else {
        unreachable!()
    };
    let split = balanced_subsample(data, *train_per_class, *test_per_class, data_seed)?;
    let train: LogisticTask = data.logistic_task(&split.train, *reg)?;
    let test: LogisticTask = data.logistic_task(&split.test, *reg)?;
    let n = train.num_examples();
    let w0 = rgd::init_uniform_box(train.dim(), *init_box, seeding::derive(data_seed, &[1]));
    let evals = ((*budget_multiplier * n as f64).floor() as usize).max(1);
    let plan = Plan {
        schedule: StepSchedule::constant(config.step)?,
        budget: Budget::evaluations(evals),
        stochastic_budget: Budget::evaluations(evals),
        record_every: *record_every,
    };
    let traj = iterative_run(config, &train, &method.kind, &plan, &w0, seed)?;
    let every = if matches!(method.kind, MethodKind::Sgd { .. } | MethodKind::Svrg { .. }) { 1 } else { *record_every };
    Ok(thinned(&traj, every)
        .map(|(t, w)| IterationMetrics {
            iteration: t,
            excess_emp_risk: None,
            excess_true_risk: None,
            dist_to_wstar: None,
            test_metric: Some(test.error_rate(w)),
        })
        .collect())
}
