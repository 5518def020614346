//! JSON experiment configuration.
//!
//! Every field except `task` and `methods` has a default, and the resolved
//! configuration (defaults filled in) is echoed into the run manifest.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;
use crate::synth::{NoiseFamily, NoiseParams, NoiseSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Controlled,
    Regression,
    Classify,
    Validate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Controlled => "controlled",
            Self::Regression => "regression",
            Self::Classify => "classify",
            Self::Validate => "validate",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEFAULT_DELTA: f64 = 0.005;
pub const DEFAULT_MULTIPLIER: f64 = 0.5;
pub const DEFAULT_STEP: f64 = 0.01;

fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_multiplier() -> f64 {
    DEFAULT_MULTIPLIER
}
fn default_step() -> f64 {
    DEFAULT_STEP
}
fn default_trials() -> usize {
    1
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_multiplier")]
    pub variance_multiplier: f64,
    /// Step size for methods that do not set their own.
    #[serde(default = "default_step")]
    pub step: f64,
    pub task: TaskConfig,
    pub methods: Vec<MethodConfig>,
}

/// Noise either at a calibrated level or with explicit parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseConfig {
    Level { family: NoiseFamily, level: u8 },
    Sd { family: NoiseFamily, sd: f64 },
    Explicit(NoiseParams),
}

impl NoiseConfig {
    pub fn resolve(&self) -> Result<NoiseSpec> {
        match self {
            Self::Level { family, level } => NoiseSpec::at_level(*family, *level),
            Self::Sd { family, sd } => NoiseSpec::with_sd(*family, *sd),
            Self::Explicit(params) => NoiseSpec::from_params(*params),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    #[default]
    Fixed,
    Decaying,
}

fn default_iterations() -> usize {
    250
}
fn default_alpha() -> f64 {
    0.1
}
fn default_init_radius() -> f64 {
    5.0
}
fn default_test_size() -> usize {
    1000
}
fn default_regression_budget() -> f64 {
    40.0
}
fn default_classify_budget() -> f64 {
    20.0
}
fn default_reg() -> f64 {
    0.001
}
fn default_init_box() -> f64 {
    0.05
}
fn default_record_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TaskConfig {
    /// Noisy quadratic with Gaussian inputs and exact risk.
    Controlled {
        n: usize,
        d: usize,
        noise: NoiseConfig,
        #[serde(default = "default_iterations")]
        iterations: usize,
        /// Fixed schedule uses step `alpha/λ̄` with the task's true λ̄.
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        schedule: ScheduleKind,
        /// Initial iterate is `w* + U[−r, r]^d`.
        #[serde(default = "default_init_radius")]
        init_radius: f64,
        #[serde(default = "one")]
        input_variance: f64,
    },
    /// Linear regression with a held-out test set.
    Regression {
        n: usize,
        d: usize,
        noise: NoiseConfig,
        #[serde(default = "default_test_size")]
        test_size: usize,
        /// Gradient evaluations allowed, as a multiple of `n`.
        #[serde(default = "default_regression_budget")]
        budget_multiplier: f64,
        #[serde(default = "default_record_every")]
        record_every: usize,
    },
    /// Multiclass logistic regression on a CSV dataset.
    Classify {
        dataset: PathBuf,
        label_column: String,
        train_per_class: usize,
        test_per_class: usize,
        #[serde(default = "default_reg")]
        reg: f64,
        #[serde(default = "default_classify_budget")]
        budget_multiplier: f64,
        #[serde(default = "default_init_box")]
        init_box: f64,
        #[serde(default = "default_record_every")]
        record_every: usize,
    },
}

impl TaskConfig {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Self::Controlled { .. } => ExperimentKind::Controlled,
            Self::Regression { .. } => ExperimentKind::Regression,
            Self::Classify { .. } => ExperimentKind::Classify,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum MethodKind {
    /// Descent on the exact risk gradient (controlled tasks only).
    Oracle,
    /// Sample-mean gradient descent.
    Erm {
        #[serde(default)]
        step: Option<f64>,
        #[serde(default)]
        minibatch: Option<usize>,
    },
    /// Robust gradient descent.
    Rgdmult {
        #[serde(default)]
        step: Option<f64>,
        #[serde(default)]
        multiplier: Option<f64>,
        #[serde(default)]
        minibatch: Option<usize>,
        #[serde(default)]
        coord_subset: Option<usize>,
    },
    /// Median-of-means gradient descent with `k` blocks.
    Mom {
        k: usize,
        #[serde(default)]
        step: Option<f64>,
    },
    Sgd {
        #[serde(default)]
        step: Option<f64>,
    },
    Svrg {
        #[serde(default)]
        step: Option<f64>,
    },
    /// Analytic least squares (regression only).
    Ols,
    /// Least absolute deviations (regression only).
    Lad {
        #[serde(default)]
        step0: Option<f64>,
    },
    /// Geometric median of block least-squares fits (regression only).
    Geomed,
}

impl MethodKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::Erm { .. } => "erm",
            Self::Rgdmult { .. } => "rgdmult",
            Self::Mom { .. } => "mom",
            Self::Sgd { .. } => "sgd",
            Self::Svrg { .. } => "svrg",
            Self::Ols => "ols",
            Self::Lad { .. } => "lad",
            Self::Geomed => "geomed",
        }
    }

    fn supports(&self, kind: ExperimentKind) -> bool {
        match self {
            Self::Oracle => kind == ExperimentKind::Controlled,
            Self::Ols | Self::Lad { .. } | Self::Geomed => kind == ExperimentKind::Regression,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    /// Name in the results file; defaults to the method name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub kind: MethodKind,
}

impl MethodConfig {
    pub fn new(kind: MethodKind) -> Self {
        Self { label: None, kind }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.kind.name())
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_error(format!("{name} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_error(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn kind(&self) -> ExperimentKind {
        self.task.kind()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config_error("trials must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(config_error(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        check_positive("variance_multiplier", self.variance_multiplier)?;
        check_positive("step", self.step)?;
        if self.methods.is_empty() {
            return Err(config_error("at least one method is required"));
        }
        let kind = self.kind();
        let mut labels = HashSet::new();
        for m in &self.methods {
            if !labels.insert(m.label()) {
                return Err(config_error(format!("duplicate method label {:?}", m.label())));
            }
            if !m.kind.supports(kind) {
                return Err(config_error(format!("method {} is not available for {kind} experiments", m.kind.name())));
            }
            self.validate_method(&m.kind)?;
        }
        match &self.task {
            TaskConfig::Controlled {
                n,
                d,
                noise,
                iterations,
                alpha,
                init_radius,
                input_variance,
                ..
            } => {
                if *n == 0 || *d == 0 || *iterations == 0 {
                    return Err(config_error("n, d and iterations must be positive"));
                }
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(config_error(format!("alpha must lie in (0, 1), got {alpha}")));
                }
                check_positive("init_radius", *init_radius)?;
                check_positive("input_variance", *input_variance)?;
                noise.resolve().map_err(|e| config_error(format!("noise: {e}")))?;
            }
            TaskConfig::Regression {
                n,
                d,
                noise,
                test_size,
                budget_multiplier,
                record_every,
            } => {
                if *n == 0 || *d == 0 || *test_size == 0 || *record_every == 0 {
                    return Err(config_error("n, d, test_size and record_every must be positive"));
                }
                check_positive("budget_multiplier", *budget_multiplier)?;
                noise.resolve().map_err(|e| config_error(format!("noise: {e}")))?;
            }
            TaskConfig::Classify {
                train_per_class,
                test_per_class,
                reg,
                budget_multiplier,
                init_box,
                record_every,
                ..
            } => {
                if *train_per_class == 0 || *test_per_class == 0 || *record_every == 0 {
                    return Err(config_error("per-class counts and record_every must be positive"));
                }
                if !(*reg >= 0.0 && reg.is_finite()) {
                    return Err(config_error("reg must be finite and >= 0"));
                }
                check_positive("budget_multiplier", *budget_multiplier)?;
                check_positive("init_box", *init_box)?;
            }
        }
        Ok(())
    }

    fn validate_method(&self, kind: &MethodKind) -> Result<()> {
        let step = |s: &Option<f64>| s.map_or(Ok(()), |v| check_positive("step", v));
        let count = |name: &str, c: &Option<usize>| match c {
            Some(0) => Err(config_error(format!("{name} must be positive"))),
            _ => Ok(()),
        };
        match kind {
            MethodKind::Erm { step: s, minibatch } => {
                step(s)?;
                count("minibatch", minibatch)
            }
            MethodKind::Rgdmult {
                step: s,
                multiplier,
                minibatch,
                coord_subset,
            } => {
                step(s)?;
                multiplier.map_or(Ok(()), |m| check_positive("multiplier", m))?;
                count("minibatch", minibatch)?;
                count("coord_subset", coord_subset)
            }
            MethodKind::Mom { k, step: s } => {
                step(s)?;
                count("k", &Some(*k))
            }
            MethodKind::Sgd { step: s } | MethodKind::Svrg { step: s } => step(s),
            MethodKind::Lad { step0 } => step(step0),
            MethodKind::Oracle | MethodKind::Ols | MethodKind::Geomed => Ok(()),
        }
    }

    /// Canonical JSON of the resolved configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hash identifying the configuration and root seed, stored with results
    /// so that resumed runs cannot mix settings.
    pub fn fingerprint(&self, seed: u64) -> String {
        let h = seeding::derive(seeding::fnv1a(&self.canonical_json()), &[seed]);
        format!("{h:016x}")
    }
}
