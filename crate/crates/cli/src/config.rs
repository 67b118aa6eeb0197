//! Experiment configuration files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use riskclass::data::{cap_per_class, load_csv, load_idx, select_classes, CsvOptions, Dataset, PerturbSpec};
use riskclass::kernel::KernelSpec;
use riskclass::models::TrainConfig;
use riskclass::risk::RiskKind;
use riskclass::synthetic::{blobs, groups, rings, BlobSpec, GroupSpec, RingSpec};
use riskclass::two_stage::TwoStageConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub dataset: DatasetSource,
    /// Class names to keep, in order; all classes when absent.
    #[serde(default)]
    pub classes: Option<Vec<String>>,
    #[serde(default)]
    pub per_class_cap: Option<usize>,
    /// Training-set perturbations. The seed field is ignored: every trial
    /// uses its own trial seed.
    #[serde(default = "no_perturbation")]
    pub perturb: PerturbSpec,
    pub methods: Vec<MethodConfig>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub fairness: Option<FairnessConfig>,
    #[serde(default = "all_charts")]
    pub charts: Vec<Chart>,
    /// Pairs compared on trial macro-F1; every method against the first
    /// when absent.
    #[serde(default)]
    pub comparisons: Option<Vec<Comparison>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        label_column: String,
        #[serde(default)]
        sensitive_column: Option<String>,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
    Blobs(BlobSpec),
    Rings(RingSpec),
    Groups(GroupSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub id: String,
    #[serde(flatten)]
    pub kind: MethodKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MethodKind {
    /// Risk-neutral linear model; the configured risk must be the expectation.
    Baseline {
        #[serde(default)]
        train: TrainConfig,
    },
    RiskAverseLinear {
        train: TrainConfig,
    },
    Kernel {
        kernel: KernelSpec,
        #[serde(default)]
        train: TrainConfig,
        /// Candidate kernel widths, chosen by macro-F1 on a validation
        /// split of the training set.
        #[serde(default)]
        gamma_grid: Option<Vec<f64>>,
        #[serde(default = "default_validation_fraction")]
        validation_fraction: f64,
    },
    TwoStage {
        config: TwoStageConfig,
    },
    /// Two-stage model over (class, group) cells, weighted by cell
    /// frequencies; predictions are collapsed to the base classes.
    TwoStageFair {
        config: TwoStageConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairnessConfig {
    /// Name of the class counted as a positive prediction.
    pub positive_class: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    F1Cdf,
    Roc,
    Convergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub a: String,
    pub b: String,
}

fn no_perturbation() -> PerturbSpec {
    PerturbSpec {
        mislabel_rate: 0.0,
        feature_remove_rate: 0.0,
        per_class_limit: None,
        seed: 0,
    }
}

fn one() -> usize {
    1
}

fn default_test_fraction() -> f64 {
    0.3
}

fn default_validation_fraction() -> f64 {
    0.3
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn all_charts() -> Vec<Chart> {
    vec![Chart::F1Cdf, Chart::Roc, Chart::Convergence]
}

impl MethodKind {
    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::Baseline { .. } => "baseline",
            MethodKind::RiskAverseLinear { .. } => "risk-averse-linear",
            MethodKind::Kernel { .. } => "kernel",
            MethodKind::TwoStage { .. } => "two-stage",
            MethodKind::TwoStageFair { .. } => "two-stage-fair",
        }
    }

    pub fn is_two_stage(&self) -> bool {
        matches!(self, MethodKind::TwoStage { .. } | MethodKind::TwoStageFair { .. })
    }
}

impl ExperimentConfig {
    /// Reads and validates a config file. Relative dataset paths are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::runtime(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::runtime(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.dataset.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::runtime(format!("invalid config: {msg}")));
        if self.version != CONFIG_VERSION {
            return bad(format!(
                "version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad("test_fraction must lie in (0, 1)".into());
        }
        if self.per_class_cap == Some(0) {
            return bad("per_class_cap must be positive".into());
        }
        self.perturb.validate().or_else(|e| bad(e.to_string()))?;
        let mut ids = BTreeSet::new();
        for m in &self.methods {
            if m.id.is_empty() || !m.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return bad(format!("method id {:?} must be nonempty and use [A-Za-z0-9_-]", m.id));
            }
            if !ids.insert(m.id.as_str()) {
                return bad(format!("duplicate method id {:?}", m.id));
            }
            let checked = match &m.kind {
                MethodKind::Baseline { train } => {
                    if train.risk.kind != RiskKind::Expectation {
                        return bad(format!("method {:?}: a baseline uses the expectation", m.id));
                    }
                    train.validate()
                }
                MethodKind::RiskAverseLinear { train } => train.validate(),
                MethodKind::Kernel {
                    kernel,
                    train,
                    gamma_grid,
                    validation_fraction,
                } => {
                    if let Some(g) = gamma_grid {
                        if g.is_empty() || g.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                            return bad(format!("method {:?}: gamma_grid needs positive values", m.id));
                        }
                        if !(*validation_fraction > 0.0 && *validation_fraction < 1.0) {
                            return bad(format!("method {:?}: validation_fraction must lie in (0, 1)", m.id));
                        }
                    }
                    kernel.validate().and_then(|_| train.validate())
                }
                MethodKind::TwoStage { config } => config.validate(),
                MethodKind::TwoStageFair { config } => {
                    if !config.systemic.class_probs.is_empty() {
                        return bad(format!(
                            "method {:?}: class_probs of a fair model come from the group cells; leave it empty",
                            m.id
                        ));
                    }
                    config.validate()
                }
            };
            checked.or_else(|e| bad(format!("method {:?}: {e}", m.id)))?;
        }
        if let Some(pairs) = &self.comparisons {
            for p in pairs {
                for id in [&p.a, &p.b] {
                    if !ids.contains(id.as_str()) {
                        return bad(format!("comparison names unknown method {id:?}"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn comparison_pairs(&self) -> Vec<(String, String)> {
        match &self.comparisons {
            Some(p) => p.iter().map(|c| (c.a.clone(), c.b.clone())).collect(),
            None => self.methods[1..]
                .iter()
                .map(|m| (m.id.clone(), self.methods[0].id.clone()))
                .collect(),
        }
    }

    pub fn wants(&self, chart: Chart) -> bool {
        self.charts.contains(&chart)
    }

    /// Files the dataset source reads.
    pub fn input_files(&self) -> Vec<&Path> {
        match &self.dataset {
            DatasetSource::Csv { path, .. } => vec![path],
            DatasetSource::Idx { images, labels } => vec![images, labels],
            _ => Vec::new(),
        }
    }

    /// True when the data are regenerated from every trial seed.
    pub fn is_synthetic(&self) -> bool {
        !matches!(self.dataset, DatasetSource::Csv { .. } | DatasetSource::Idx { .. })
    }

    /// Loads (or generates, with `seed`) the dataset and applies the class
    /// subset.
    pub fn load_dataset(&self, seed: u64) -> Result<Dataset, CliError> {
        let data = match &self.dataset {
            DatasetSource::Csv {
                path,
                label_column,
                sensitive_column,
            } => {
                let mut opts = CsvOptions::new(label_column.clone());
                if let Some(s) = sensitive_column {
                    opts = opts.sensitive(s.clone());
                }
                load_csv(path, &opts)?
            }
            DatasetSource::Idx { images, labels } => load_idx(images, labels)?,
            DatasetSource::Blobs(spec) => blobs(spec, seed)?,
            DatasetSource::Rings(spec) => rings(spec, seed)?,
            DatasetSource::Groups(spec) => groups(spec, seed)?,
        };
        Ok(match &self.classes {
            Some(names) => select_classes(&data, names)?,
            None => data,
        })
    }

    /// Applies the per-class cap with `seed`.
    pub fn cap(&self, data: Dataset, seed: u64) -> Dataset {
        match self.per_class_cap.or(self.perturb.per_class_limit) {
            Some(limit) => cap_per_class(&data, limit, seed),
            None => data,
        }
    }
}

impl DatasetSource {
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            DatasetSource::Csv { path, .. } => fix(path),
            DatasetSource::Idx { images, labels } => {
                fix(images);
                fix(labels);
            }
            _ => {}
        }
    }
}
