//! Two-stage systemic-risk training by regularized multi-cut decomposition.
//!
//! The first stage picks `theta = (v^i, gamma_i)_i`; class `i`'s second stage
//! measures its margin violations with the inner risk, giving `R_i(theta)`.
//! The objective `rho_o[R(theta)]` is minimized by a proximal cutting-plane
//! method that keeps one set of linearizations per class plus objective
//! cuts built from dual elements of the outer measure.

mod extensive;
mod master;
mod second_stage;

use std::io::Write;
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::rng::{stream, Stream};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{center, LinearModel};
use crate::risk::{evaluate_unchecked, outer_subgradient, SystemicSpec};
use crate::solver::{dot, SolveOptions, SolveStatus};

pub use extensive::extensive_form;
pub use master::{solve_master, MasterSolution};
pub use second_stage::{second_stage, SecondStage};

/// Per-class blocks `theta_i = (v^i, gamma_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub blocks: Vec<Vec<f64>>,
}

impl Theta {
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        Theta {
            blocks: vec![vec![0.0; n_features + 1]; n_classes],
        }
    }

    pub fn from_model_parts(v: &[Vec<f64>], gamma: &[f64]) -> Self {
        Theta {
            blocks: v
                .iter()
                .zip(gamma)
                .map(|(w, &g)| {
                    let mut b = w.clone();
                    b.push(g);
                    b
                })
                .collect(),
        }
    }

    pub fn from_model(model: &LinearModel) -> Self {
        Self::from_model_parts(&model.v, &model.gamma)
    }

    /// Standard normal weights scaled to unit norm per class, zero offsets.
    pub fn random_unit(n_classes: usize, n_features: usize, seed: u64) -> Self {
        let mut rng = stream(seed, Stream::Init, 0);
        let blocks = (0..n_classes)
            .map(|_| {
                let mut v: Vec<f64> = (0..n_features).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = dot(&v, &v).sqrt();
                if norm > 0.0 {
                    v.iter_mut().for_each(|x| *x /= norm);
                }
                v.push(0.0);
                v
            })
            .collect();
        Theta { blocks }
    }

    pub(crate) fn check(&self, n_classes: usize, n_features: usize) -> Result<()> {
        if self.blocks.len() != n_classes {
            return Err(Error::dim("theta blocks", n_classes, self.blocks.len()));
        }
        for b in &self.blocks {
            if b.len() != n_features + 1 {
                return Err(Error::dim("theta block", n_features + 1, b.len()));
            }
        }
        Ok(())
    }

    /// Sum of squared weight norms (offsets excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| dot(&b[..b.len() - 1], &b[..b.len() - 1]))
            .sum()
    }

    pub fn distance(&self, other: &Theta) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .zip(other.blocks.iter().flatten())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Linear model with offsets shifted to mean zero.
    pub fn to_model(&self) -> Result<LinearModel> {
        let v = self.blocks.iter().map(|b| b[..b.len() - 1].to_vec()).collect();
        let mut gamma: Vec<f64> = self.blocks.iter().map(|b| b[b.len() - 1]).collect();
        center(&mut gamma);
        LinearModel::new(v, gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Cut {
    /// `alpha >= sum_i mu_i r_i`.
    Objective { mu: Vec<f64> },
    /// `r_class >= value + sum_j <gradients[j], theta_j - anchor_j>`.
    Scenario {
        class: usize,
        value: f64,
        gradients: Vec<Vec<f64>>,
        anchor: Theta,
    },
}

impl Cut {
    /// Value of a scenario cut's linearization at `theta` (`None` for
    /// objective cuts).
    pub fn scenario_value(&self, theta: &Theta) -> Option<f64> {
        match self {
            Cut::Objective { .. } => None,
            Cut::Scenario {
                value,
                gradients,
                anchor,
                ..
            } => Some(
                value
                    + gradients
                        .iter()
                        .zip(theta.blocks.iter().zip(&anchor.blocks))
                        .map(|(g, (t, a))| {
                            g.iter()
                                .zip(t.iter().zip(a))
                                .map(|(g, (t, a))| g * (t - a))
                                .sum::<f64>()
                        })
                        .sum::<f64>(),
            ),
        }
    }
}

/// All cuts collected so far. Objective cuts with an identical `mu` are
/// stored once.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CutStore {
    cuts: Vec<Cut>,
}

impl CutStore {
    pub fn push(&mut self, cut: Cut) -> bool {
        if let Cut::Objective { mu } = &cut {
            let dup = self
                .cuts
                .iter()
                .any(|c| matches!(c, Cut::Objective { mu: m } if m == mu));
            if dup {
                return false;
            }
        }
        self.cuts.push(cut);
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = &Cut> {
        self.cuts.iter()
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn objective_cuts(&self) -> usize {
        self.cuts.iter().filter(|c| matches!(c, Cut::Objective { .. })).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Descent,
    Null,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    /// Objective at the current iterate.
    pub rho_k: f64,
    /// Objective at the proximal center after the step test.
    pub rho_bar: f64,
    /// Model value returned by the master at this iteration.
    pub alpha: f64,
    pub step_kind: StepKind,
    pub wall_ms: f64,
    /// `|theta^{k+1} - w^k|`.
    pub step_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub k: usize,
    /// Proximal center.
    pub w: Theta,
    pub rho_bar: f64,
    pub alpha: f64,
    pub cuts: CutStore,
    pub trace: Vec<TraceRow>,
    pub status: SolveStatus,
}

impl SolverState {
    pub fn new(w: Theta) -> Self {
        SolverState {
            k: 0,
            w,
            rho_bar: f64::INFINITY,
            alpha: f64::NEG_INFINITY,
            cuts: CutStore::default(),
            trace: Vec::new(),
            status: SolveStatus::IterLimit,
        }
    }

    pub fn gap(&self) -> f64 {
        self.rho_bar - self.alpha
    }

    /// Writes the trace as CSV.
    pub fn write_trace<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.trace {
            w.serialize(row)
                .map_err(|e| Error::data(format!("writing trace: {e}")))?;
        }
        w.flush().map_err(|e| Error::data(format!("writing trace: {e}")))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageConfig {
    /// Inner and outer measures; empty `class_probs` means the class
    /// frequencies of the training data.
    pub systemic: SystemicSpec,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_prox")]
    pub prox_sigma: f64,
    /// Absolute stopping gap; `None` uses `1e-6 (1 + |rho_bar|)`.
    #[serde(default)]
    pub stop_tol: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    /// Weight of `sum_i |v^i|^2` added to the first-stage objective.
    #[serde(default)]
    pub ridge: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_theta() -> f64 {
    0.5
}

fn default_prox() -> f64 {
    0.005
}

fn default_max_iter() -> usize {
    500
}

fn default_tol() -> f64 {
    SolveOptions::default().tol
}

impl TwoStageConfig {
    pub fn new(systemic: SystemicSpec) -> Self {
        TwoStageConfig {
            systemic,
            theta: default_theta(),
            prox_sigma: default_prox(),
            stop_tol: None,
            max_iter: default_max_iter(),
            seed: 0,
            ridge: 0.0,
            tol: default_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::param("theta must lie in (0, 1)"));
        }
        if !(self.prox_sigma > 0.0 && self.prox_sigma.is_finite()) {
            return Err(Error::param("prox_sigma must be positive"));
        }
        if let Some(t) = self.stop_tol {
            if !(t > 0.0) {
                return Err(Error::param("stop_tol must be positive"));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter must be positive"));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::param("ridge must be nonnegative"));
        }
        if !self.systemic.outer.is_polyhedral() {
            return Err(Error::Unsupported(
                "the outer measure must be the expectation, order-1 semideviation or AVaR".into(),
            ));
        }
        if !self.systemic.inner.is_polyhedral() {
            return Err(Error::Unsupported(
                "the inner measure must be the expectation, order-1 semideviation or AVaR".into(),
            ));
        }
        self.systemic.inner.validate()?;
        self.systemic.outer.validate()
    }

    /// Systemic spec with class probabilities filled in for `data`.
    pub fn resolved(&self, data: &Dataset) -> Result<SystemicSpec> {
        let mut s = self.systemic.clone();
        if s.class_probs.is_empty() {
            s.class_probs = data.class_probs();
        }
        if s.class_probs.len() != data.n_classes() {
            return Err(Error::dim("class probabilities", data.n_classes(), s.class_probs.len()));
        }
        s.validate()?;
        Ok(s)
    }

    fn stop_gap(&self, rho_bar: f64) -> f64 {
        self.stop_tol.unwrap_or(1e-6 * (1.0 + rho_bar.abs()))
    }

    pub(crate) fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            ..SolveOptions::default()
        }
    }
}

/// First-stage objective and its pieces at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub risks: Vec<f64>,
    pub stages: Vec<SecondStage>,
}

/// `rho_o[R(theta)]` (plus the ridge term) with all second-stage solves.
pub fn evaluate_theta(theta: &Theta, data: &Dataset, cfg: &TwoStageConfig) -> Result<Evaluation> {
    let spec = cfg.resolved(data)?;
    evaluate_with(theta, data, cfg, &spec)
}

fn evaluate_with(theta: &Theta, data: &Dataset, cfg: &TwoStageConfig, spec: &SystemicSpec) -> Result<Evaluation> {
    let opts = cfg.solve_options();
    let stages = (0..data.n_classes())
        .map(|i| second_stage::second_stage_with(theta, i, data, &spec.inner, &opts))
        .collect::<Result<Vec<_>>>()?;
    let risks: Vec<f64> = stages.iter().map(|s| s.value).collect();
    let objective = evaluate_unchecked(&risks, &spec.class_probs, &spec.outer) + cfg.ridge * theta.weight_norm_sq();
    Ok(Evaluation {
        objective,
        risks,
        stages,
    })
}

/// Runs the decomposition from a seeded random unit-norm start.
pub fn train_two_stage(data: &Dataset, cfg: &TwoStageConfig) -> Result<(LinearModel, SolverState)> {
    let start = Theta::random_unit(data.n_classes(), data.feature_dim(), cfg.seed);
    train_two_stage_from(data, cfg, start)
}

/// Runs the decomposition from `start`. Reaching `max_iter` is not an
/// error: the state carries `IterLimit` and the model is the last center.
pub fn train_two_stage_from(data: &Dataset, cfg: &TwoStageConfig, start: Theta) -> Result<(LinearModel, SolverState)> {
    cfg.validate()?;
    data.require_trainable()?;
    start.check(data.n_classes(), data.feature_dim())?;
    let spec = cfg.resolved(data)?;
    let clock = Instant::now();

    let mut state = SolverState::new(start.clone());
    let mut theta = start;
    let mut prev_alpha = f64::NEG_INFINITY;
    for k in 1..=cfg.max_iter {
        state.k = k;
        let eval = evaluate_with(&theta, data, cfg, &spec)?;
        let rho = eval.objective;
        let mu = outer_subgradient(&eval.risks, &spec.outer, &spec.class_probs)?;

        let descent = k == 1 || rho <= (1.0 - cfg.theta) * state.rho_bar + cfg.theta * prev_alpha;
        if descent {
            state.w = theta.clone();
            state.rho_bar = rho;
        }
        state.cuts.push(Cut::Objective { mu });
        for (i, s) in eval.stages.into_iter().enumerate() {
            state.cuts.push(Cut::Scenario {
                class: i,
                value: s.value,
                gradients: s.gradients,
                anchor: theta.clone(),
            });
        }

        let m = solve_master(&state, cfg)?;
        state.alpha = m.alpha;
        prev_alpha = m.alpha;
        let step_norm = m.theta.distance(&state.w);
        state.trace.push(TraceRow {
            k,
            rho_k: rho,
            rho_bar: state.rho_bar,
            alpha: m.alpha,
            step_kind: if descent { StepKind::Descent } else { StepKind::Null },
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
            step_norm,
        });
        theta = m.theta;
        if state.rho_bar - state.alpha <= cfg.stop_gap(state.rho_bar) {
            state.status = SolveStatus::Optimal;
            break;
        }
    }
    let model = state.w.to_model()?;
    Ok((model, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Classifier;
    use crate::risk::RiskSpec;

    fn toy() -> Dataset {
        Dataset::from_labels(
            vec![vec![-1.0], vec![-2.0], vec![-0.2], vec![1.0], vec![0.3], vec![2.5]],
            vec![0, 0, 0, 1, 1, 1],
            2,
        )
        .unwrap()
    }

    fn cfg(outer: RiskSpec) -> TwoStageConfig {
        TwoStageConfig::new(SystemicSpec {
            inner: RiskSpec::expectation(),
            outer,
            class_probs: Vec::new(),
        })
    }

    #[test]
    fn toy_converges_to_extensive_form() {
        for outer in [RiskSpec::expectation(), RiskSpec::msd(0.5), RiskSpec::avar(0.5)] {
            let c = cfg(outer);
            let (model, state) = train_two_stage(&toy(), &c).unwrap();
            let oracle = extensive_form(&toy(), &c).unwrap();
            assert_eq!(state.status, SolveStatus::Optimal);
            assert!((state.rho_bar - oracle).abs() < 1e-4, "{} vs {oracle}", state.rho_bar);
            assert_eq!(model.n_features(), 1);
        }
    }

    #[test]
    fn objective_cuts_are_deduplicated() {
        let mut store = CutStore::default();
        assert!(store.push(Cut::Objective { mu: vec![0.5, 0.5] }));
        assert!(!store.push(Cut::Objective { mu: vec![0.5, 0.5] }));
        assert!(store.push(Cut::Objective { mu: vec![0.25, 0.75] }));
        assert_eq!(store.objective_cuts(), 2);
    }

    #[test]
    fn random_start_has_unit_weights() {
        let t = Theta::random_unit(3, 4, 9);
        for b in &t.blocks {
            assert!((dot(&b[..4], &b[..4]) - 1.0).abs() < 1e-12);
            assert_eq!(b[4], 0.0);
        }
        assert_eq!(t, Theta::random_unit(3, 4, 9));
    }

    #[test]
    fn trace_csv_has_header() {
        let (_, state) = train_two_stage(&toy(), &cfg(RiskSpec::expectation())).unwrap();
        let mut buf = Vec::new();
        state.write_trace(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,rho_k,rho_bar,alpha,step_kind,wall_ms,step_norm\n"));
        assert_eq!(text.lines().count(), state.trace.len() + 1);
    }
}
