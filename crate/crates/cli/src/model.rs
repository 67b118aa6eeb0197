//! Fitted models of every method kind, and the model file format.

use std::path::Path;

use riskclass::data::rng::{derive_seed, Stream};
use riskclass::data::{split, Dataset};
use riskclass::eval::f1_scores;
use riskclass::fairness::{split_by_sensitive, GroupSplit};
use riskclass::kernel::{train_kernel, KernelModel};
use riskclass::models::{train_crammer_singer, Classifier, LinearModel};
use riskclass::two_stage::{train_two_stage, SolverState, TwoStageConfig};
use riskclass::Result;
use serde::{Deserialize, Serialize};

use crate::config::MethodKind;
use crate::CliError;

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Fitted {
    Linear {
        model: LinearModel,
    },
    Kernel {
        model: KernelModel,
    },
    /// A model over (class, group) cells; scores of a base class are the
    /// largest score among its cells.
    Split {
        model: LinearModel,
        split: GroupSplit,
    },
}

impl Classifier for Fitted {
    fn n_classes(&self) -> usize {
        match self {
            Fitted::Linear { model } => model.n_classes(),
            Fitted::Kernel { model } => model.n_classes(),
            Fitted::Split { split, .. } => split.base_classes.len(),
        }
    }

    fn n_features(&self) -> usize {
        match self {
            Fitted::Linear { model } => model.n_features(),
            Fitted::Kernel { model } => model.n_features(),
            Fitted::Split { model, .. } => model.n_features(),
        }
    }

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Fitted::Linear { model } => model.scores(x),
            Fitted::Kernel { model } => model.scores(x),
            Fitted::Split { model, split } => {
                let cell_scores = model.scores(x)?;
                let mut out = vec![f64::NEG_INFINITY; split.base_classes.len()];
                for (s, &(class, _)) in cell_scores.iter().zip(&split.cells) {
                    out[class] = out[class].max(*s);
                }
                Ok(out)
            }
        }
    }
}

/// A fitted model plus what the fit produced along the way.
#[derive(Debug, Clone)]
pub struct Fit {
    pub model: Fitted,
    pub state: Option<SolverState>,
    pub gamma: Option<f64>,
}

/// Trains `kind` on `train`. Two-stage methods start from `seed`; kernel
/// tuning splits off its validation set with a seed derived from `seed`.
pub fn fit(kind: &MethodKind, train: &Dataset, seed: u64) -> Result<Fit> {
    let plain = |model| Fit {
        model,
        state: None,
        gamma: None,
    };
    match kind {
        MethodKind::Baseline { train: cfg } | MethodKind::RiskAverseLinear { train: cfg } => {
            Ok(plain(Fitted::Linear {
                model: train_crammer_singer(train, cfg)?,
            }))
        }
        MethodKind::Kernel {
            kernel,
            train: cfg,
            gamma_grid,
            validation_fraction,
        } => {
            let mut spec = *kernel;
            let mut gamma = None;
            if let Some(grid) = gamma_grid {
                let (fit_part, val) = split(train, *validation_fraction, derive_seed(seed, Stream::Tuning, 0), true)?;
                let mut best = (f64::NEG_INFINITY, grid[0]);
                for &g in grid {
                    spec.gamma = g;
                    let m = train_kernel(&fit_part, cfg, &spec)?;
                    let f1 = f1_scores(&m.predict_all(val.points())?, val.labels(), val.n_classes())?.macro_avg;
                    if f1 > best.0 {
                        best = (f1, g);
                    }
                }
                spec.gamma = best.1;
                gamma = Some(best.1);
            }
            Ok(Fit {
                model: Fitted::Kernel {
                    model: train_kernel(train, cfg, &spec)?,
                },
                state: None,
                gamma,
            })
        }
        MethodKind::TwoStage { config } => {
            let cfg = TwoStageConfig { seed, ..config.clone() };
            let (model, state) = train_two_stage(train, &cfg)?;
            Ok(Fit {
                model: Fitted::Linear { model },
                state: Some(state),
                gamma: None,
            })
        }
        MethodKind::TwoStageFair { config } => {
            let (cells, split) = split_by_sensitive(train)?;
            let mut cfg = TwoStageConfig { seed, ..config.clone() };
            cfg.systemic.class_probs = split.group_probs.clone();
            let (model, state) = train_two_stage(&cells, &cfg)?;
            Ok(Fit {
                model: Fitted::Split { model, split },
                state: Some(state),
                gamma: None,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub method_id: String,
    pub method_kind: String,
    pub class_names: Vec<String>,
    pub model: Fitted,
}

impl ModelFile {
    pub fn write(&self, path: &Path) -> std::result::Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::runtime(e.to_string()))?;
        std::fs::write(path, text + "\n")
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> std::result::Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::runtime(format!("cannot read model {}: {e}", path.display())))?;
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(|e| CliError::runtime(format!("invalid model file {}: {e}", path.display())))?;
        if file.version != MODEL_FILE_VERSION {
            return Err(CliError::runtime(format!(
                "model file version {} is not supported (expected {MODEL_FILE_VERSION})",
                file.version
            )));
        }
        if file.class_names.len() != file.model.n_classes() {
            return Err(CliError::runtime("model file class names do not match the model"));
        }
        Ok(file)
    }
}
