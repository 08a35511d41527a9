//! Experiment configuration: one TOML file with nested sections covering the
//! dataset, the model, the constrained problem, the splits, the solver stack,
//! and the output location.
//!
//! Two environment variables override the file (nothing else does):
//! `FAIRAUC_OUT_DIR` replaces `output.dir` and `FAIRAUC_WORKERS` replaces
//! `sweep.workers`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use fairauc::dataset::{
    parse_csv_with, parse_libsvm, synthetic_biased_gaussians, CsvOptions, Dataset, SyntheticSpec,
};
use fairauc::metrics::FairnessKind;
use fairauc::model::{ModelKind, ModelShape, ParamDomain};
use serde::Deserialize;

/// Feasibility slack used by every full-batch audit in the harness: a model
/// counts as feasible when `f_i <= 1 + kappa + AUDIT_SLACK`.
pub const AUDIT_SLACK: f64 = 1e-3;

/// Top-level experiment description, one per config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub problem: ProblemConfig,
    pub split: SplitConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

/// Where the data comes from: a libsvm file, a CSV file, or the built-in
/// synthetic generator.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// One of `"libsvm"`, `"csv"`, `"synthetic"`.
    pub source: String,
    /// File path; required for the file-backed sources.
    pub path: Option<PathBuf>,
    /// libsvm: 1-based feature index holding the sensitive attribute.
    pub sensitive_index: Option<usize>,
    /// libsvm: values strictly above this threshold count as protected.
    pub sensitive_threshold: Option<f64>,
    /// csv: header names and token encodings.
    pub label_column: Option<String>,
    pub sensitive_column: Option<String>,
    pub positive_label: Option<String>,
    pub protected_token: Option<String>,
    #[serde(default)]
    pub keep_sensitive: bool,
    /// synthetic: sample count and draw seed (generator defaults otherwise).
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub feature_dim: Option<usize>,
    pub protected_fraction: Option<f64>,
    pub positive_rate_protected: Option<f64>,
    pub positive_rate_unprotected: Option<f64>,
    pub label_separation: Option<f64>,
    pub group_shift: Option<f64>,
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `"linear"` or `"mlp2"`.
    pub kind: String,
    /// Hidden width; required (nonzero) for mlp2, ignored for linear.
    #[serde(default)]
    pub hidden_dim: usize,
    /// Euclidean radius of the weight domain.
    pub radius: f64,
}

/// Either one fairness budget or a list to sweep.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum KappaSpec {
    One(f64),
    Many(Vec<f64>),
}

impl KappaSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            KappaSpec::One(v) => vec![*v],
            KappaSpec::Many(vs) => vs.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// A fairness-notion name as printed by the metrics module
    /// (`group_auc`, `inter_group_pairwise`, ...).
    pub fairness: String,
    pub c1: f64,
    pub c2: f64,
    pub kappa: KappaSpec,
    /// Tie contribution for empirical AUCs (0.5 = Mann-Whitney).
    #[serde(default = "default_tie_weight")]
    pub tie_weight: f64,
}

fn default_tie_weight() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    /// Train/validation/test fractions; must sum to 1.
    pub fractions: [f64; 3],
    pub seed: u64,
}

/// Minibatch size or the string `"full"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BatchSpec {
    Size(usize),
    Named(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmdSection {
    pub iterations: usize,
    pub batch: BatchSpec,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    /// Multiplier on the warm-up step-scale estimate. The estimate samples
    /// gradients only at the start point, which understates the scale on
    /// problems whose iterates wander into steeper regions; a multiple of a
    /// few damps the early steps accordingly.
    #[serde(default = "default_step_scale_multiplier")]
    pub step_scale_multiplier: f64,
    /// Explicit step-scale constant; bypasses estimation entirely.
    pub step_scale: Option<f64>,
}

fn default_snapshot_every() -> usize {
    200
}

fn default_step_scale_multiplier() -> f64 {
    5.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SflsSection {
    pub eps_opt: f64,
    pub max_outer: usize,
    #[serde(default = "default_theta")]
    pub theta: f64,
    pub r0: Option<f64>,
}

fn default_theta() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IqrcSection {
    pub outer_iterations: usize,
    pub eps_hat: f64,
    #[serde(default = "default_rho_hat")]
    pub rho_hat: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_rho_hat() -> f64 {
    1e-5
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// `"convex"` (level-set solver, linear models) or `"weakly_convex"`
    /// (proximal-point outer loop, mlp2 models).
    pub mode: String,
    pub smd: SmdSection,
    pub sfls: SflsSection,
    pub iqrc: Option<IqrcSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seeds: default_seeds(),
            workers: default_workers(),
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl ExperimentConfig {
    /// Parses and validates a config file, then applies the two supported
    /// environment overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text)?;
        cfg.apply_env_overrides()?;
        Ok(cfg)
    }

    /// Parses and validates config text.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).context("config schema")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `FAIRAUC_OUT_DIR` replaces `output.dir`; `FAIRAUC_WORKERS` replaces
    /// `sweep.workers`. No other environment variable is consulted.
    fn apply_env_overrides(&mut self) -> Result<()> {
        if let Ok(dir) = std::env::var("FAIRAUC_OUT_DIR") {
            if !dir.is_empty() {
                self.output.dir = PathBuf::from(dir);
            }
        }
        if let Ok(workers) = std::env::var("FAIRAUC_WORKERS") {
            if !workers.is_empty() {
                self.sweep.workers = workers
                    .parse()
                    .context("FAIRAUC_WORKERS must be a positive integer")?;
            }
        }
        Ok(())
    }

    /// Field-path-labelled validation of everything the type system cannot
    /// express.
    pub fn validate(&self) -> Result<()> {
        match self.dataset.source.as_str() {
            "libsvm" | "csv" => {
                if self.dataset.path.is_none() {
                    bail!("dataset.path: required when dataset.source = {:?}", self.dataset.source);
                }
                if self.dataset.source == "libsvm" && self.dataset.sensitive_index.is_none() {
                    bail!("dataset.sensitive_index: required for libsvm input");
                }
                if self.dataset.source == "csv" {
                    for (field, value) in [
                        ("dataset.label_column", &self.dataset.label_column),
                        ("dataset.sensitive_column", &self.dataset.sensitive_column),
                        ("dataset.positive_label", &self.dataset.positive_label),
                        ("dataset.protected_token", &self.dataset.protected_token),
                    ] {
                        if value.is_none() {
                            bail!("{field}: required for csv input");
                        }
                    }
                }
            }
            "synthetic" => {}
            other => bail!("dataset.source: unknown source {other:?} (libsvm, csv, synthetic)"),
        }

        let kind = self.model_kind()?;
        if kind == ModelKind::Mlp2 && self.model.hidden_dim == 0 {
            bail!("model.hidden_dim: must be positive for mlp2 models");
        }
        if !(self.model.radius.is_finite() && self.model.radius > 0.0) {
            bail!("model.radius: {} is not a positive real", self.model.radius);
        }

        self.fairness_kind()?;
        if !(self.problem.c1.is_finite() && self.problem.c1 > 0.0) {
            bail!("problem.c1: {} is not a positive real", self.problem.c1);
        }
        if !(self.problem.c2.is_finite() && self.problem.c2 >= 0.0) {
            bail!("problem.c2: {} is not a nonnegative real", self.problem.c2);
        }
        let kappas = self.problem.kappa.values();
        if kappas.is_empty() {
            bail!("problem.kappa: at least one budget is required");
        }
        for (i, k) in kappas.iter().enumerate() {
            if !(k.is_finite() && *k >= 0.0) {
                bail!("problem.kappa[{i}]: {k} is negative or not finite");
            }
        }
        if !(0.0..=1.0).contains(&self.problem.tie_weight) {
            bail!("problem.tie_weight: {} is outside [0, 1]", self.problem.tie_weight);
        }

        let total: f64 = self.split.fractions.iter().sum();
        if self.split.fractions.iter().any(|f| *f <= 0.0) || (total - 1.0).abs() > 1e-9 {
            bail!("split.fractions: must be positive and sum to 1, got {:?}", self.split.fractions);
        }

        match self.solver.mode.as_str() {
            "convex" => {
                if kind != ModelKind::Linear {
                    bail!("solver.mode: convex mode requires model.kind = \"linear\"");
                }
            }
            "weakly_convex" => {
                if kind != ModelKind::Mlp2 {
                    bail!("solver.mode: weakly_convex mode requires model.kind = \"mlp2\"");
                }
                if self.solver.iqrc.is_none() {
                    bail!("solver.iqrc: section required when solver.mode = \"weakly_convex\"");
                }
            }
            other => bail!("solver.mode: unknown mode {other:?} (convex, weakly_convex)"),
        }

        if self.solver.smd.iterations == 0 {
            bail!("solver.smd.iterations: must be positive");
        }
        if let BatchSpec::Named(name) = &self.solver.smd.batch {
            if name != "full" {
                bail!("solver.smd.batch: expected a size or \"full\", got {name:?}");
            }
        }
        if let BatchSpec::Size(0) = self.solver.smd.batch {
            bail!("solver.smd.batch: minibatch size must be positive");
        }
        if self.solver.smd.snapshot_every == 0 {
            bail!("solver.smd.snapshot_every: must be positive");
        }
        if !(self.solver.smd.step_scale_multiplier.is_finite()
            && self.solver.smd.step_scale_multiplier > 0.0)
        {
            bail!(
                "solver.smd.step_scale_multiplier: {} is not a positive real",
                self.solver.smd.step_scale_multiplier
            );
        }
        if !(self.solver.sfls.eps_opt.is_finite() && self.solver.sfls.eps_opt > 0.0) {
            bail!("solver.sfls.eps_opt: {} is not a positive real", self.solver.sfls.eps_opt);
        }
        if self.solver.sfls.max_outer == 0 {
            bail!("solver.sfls.max_outer: must be positive");
        }
        if let Some(iqrc) = &self.solver.iqrc {
            if iqrc.outer_iterations == 0 {
                bail!("solver.iqrc.outer_iterations: must be positive");
            }
            if !(iqrc.eps_hat.is_finite() && iqrc.eps_hat > 0.0) {
                bail!("solver.iqrc.eps_hat: {} is not a positive real", iqrc.eps_hat);
            }
            if !(iqrc.rho_hat.is_finite() && iqrc.rho_hat > 0.0) {
                bail!("solver.iqrc.rho_hat: {} is not a positive real", iqrc.rho_hat);
            }
        }

        if self.sweep.seeds.is_empty() {
            bail!("sweep.seeds: at least one seed is required");
        }
        if self.sweep.workers == 0 {
            bail!("sweep.workers: must be positive");
        }
        Ok(())
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        match self.model.kind.as_str() {
            "linear" => Ok(ModelKind::Linear),
            "mlp2" => Ok(ModelKind::Mlp2),
            other => bail!("model.kind: unknown kind {other:?} (linear, mlp2)"),
        }
    }

    pub fn fairness_kind(&self) -> Result<FairnessKind> {
        FairnessKind::from_str(&self.problem.fairness)
            .map_err(|e| anyhow::anyhow!("problem.fairness: {e}"))
    }

    /// The model shape for a dataset of the given feature dimension.
    pub fn model_shape(&self, feature_dim: usize) -> Result<ModelShape> {
        Ok(match self.model_kind()? {
            ModelKind::Linear => ModelShape::linear(feature_dim),
            ModelKind::Mlp2 => ModelShape::mlp2(feature_dim, self.model.hidden_dim),
        })
    }

    pub fn param_domain(&self) -> Result<ParamDomain> {
        ParamDomain::new(self.model.radius).map_err(|e| anyhow::anyhow!("model.radius: {e}"))
    }

    /// Loads the configured dataset (reads the file or draws the synthetic
    /// sample).
    pub fn load_dataset(&self) -> Result<Dataset> {
        match self.dataset.source.as_str() {
            "libsvm" => {
                let path = self.dataset.path.as_ref().expect("validated");
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let index = self.dataset.sensitive_index.expect("validated");
                let threshold = self.dataset.sensitive_threshold.unwrap_or(0.5);
                Ok(parse_libsvm(&text, index, threshold)?)
            }
            "csv" => {
                let path = self.dataset.path.as_ref().expect("validated");
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let opts = CsvOptions {
                    label_column: self.dataset.label_column.clone().expect("validated"),
                    sensitive_column: self.dataset.sensitive_column.clone().expect("validated"),
                    positive_label: self.dataset.positive_label.clone().expect("validated"),
                    protected_token: self.dataset.protected_token.clone().expect("validated"),
                    keep_sensitive: self.dataset.keep_sensitive,
                };
                Ok(parse_csv_with(&text, &opts)?)
            }
            "synthetic" => {
                let mut spec = SyntheticSpec::default();
                if let Some(n) = self.dataset.n {
                    spec.n = n;
                }
                if let Some(d) = self.dataset.feature_dim {
                    spec.feature_dim = d;
                }
                if let Some(v) = self.dataset.protected_fraction {
                    spec.protected_fraction = v;
                }
                if let Some(v) = self.dataset.positive_rate_protected {
                    spec.positive_rate_protected = v;
                }
                if let Some(v) = self.dataset.positive_rate_unprotected {
                    spec.positive_rate_unprotected = v;
                }
                if let Some(v) = self.dataset.label_separation {
                    spec.label_separation = v;
                }
                if let Some(v) = self.dataset.group_shift {
                    spec.group_shift = v;
                }
                if let Some(v) = self.dataset.noise {
                    spec.noise = v;
                }
                let seed = self.dataset.seed.unwrap_or(7);
                Ok(synthetic_biased_gaussians(&spec, seed)?)
            }
            other => bail!("dataset.source: unknown source {other:?}"),
        }
    }
}
