//! Crammer-Singer style linear classifiers trained as one quadratic program.
//!
//! ```text
//!     min  sum_i lambda_i rho[Z_i] + sigma sum_i |v^i|^2
//!     s.t. z^i_l >= psi_j(x^i_l) - psi_i(x^i_l) + 1,   j != i
//!          z >= 0
//! ```
//!
//! with `psi_i(x) = <v^i, x> - gamma_i` and `Z_i` uniform over the slacks
//! of class `i`. Expectation gives the risk-neutral baseline.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::epigraph;
use crate::error::{Error, Result};
use crate::risk::{evaluate, EmpiricalRV, RiskSpec};
use crate::solver::{dot, solve, ProgramBuilder, SolveOptions};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Anything that scores a point against each class.
pub trait Classifier {
    fn n_classes(&self) -> usize;

    fn n_features(&self) -> usize;

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Highest-scoring class, smallest index on ties.
    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }

    fn predict_all(&self, points: &[Vec<f64>]) -> Result<Vec<usize>> {
        points.iter().map(|x| self.predict(x)).collect()
    }

    fn scores_all(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        points.iter().map(|x| self.scores(x)).collect()
    }
}

/// Index of the first maximum.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub format_version: u32,
    /// Per-class weight vectors `v^i`.
    pub v: Vec<Vec<f64>>,
    /// Per-class offsets `gamma_i`.
    pub gamma: Vec<f64>,
}

impl LinearModel {
    pub fn new(v: Vec<Vec<f64>>, gamma: Vec<f64>) -> Result<Self> {
        let m = LinearModel {
            format_version: MODEL_FORMAT_VERSION,
            v,
            gamma,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        LinearModel {
            format_version: MODEL_FORMAT_VERSION,
            v: vec![vec![0.0; n_features]; n_classes],
            gamma: vec![0.0; n_classes],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::data(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        if self.v.is_empty() {
            return Err(Error::data("model has no classes"));
        }
        if self.gamma.len() != self.v.len() {
            return Err(Error::dim("model offsets", self.v.len(), self.gamma.len()));
        }
        let n = self.v[0].len();
        for w in &self.v {
            if w.len() != n {
                return Err(Error::dim("model weights", n, w.len()));
            }
        }
        let finite = self.v.iter().flatten().chain(&self.gamma).all(|x| x.is_finite());
        if !finite {
            return Err(Error::data("model has non-finite parameters"));
        }
        Ok(())
    }

    /// Sum of squared weight norms.
    pub fn weight_norm_sq(&self) -> f64 {
        self.v.iter().map(|w| dot(w, w)).sum()
    }
}

impl Classifier for LinearModel {
    fn n_classes(&self) -> usize {
        self.v.len()
    }

    fn n_features(&self) -> usize {
        self.v.first().map_or(0, Vec::len)
    }

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        decision_scores(self, x)
    }
}

/// `psi_i(x)` for every class.
pub fn decision_scores(model: &LinearModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.n_features() {
        return Err(Error::dim("decision scores", model.n_features(), x.len()));
    }
    Ok(model.v.iter().zip(&model.gamma).map(|(w, g)| dot(w, x) - g).collect())
}

pub fn predict(model: &LinearModel, x: &[f64]) -> Result<usize> {
    model.predict(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub sigma: f64,
    /// Class weights; `None` uses the class frequencies `m_i / m`.
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default = "RiskSpec::expectation")]
    pub risk: RiskSpec,
    #[serde(default = "default_true")]
    pub include_offset: bool,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_true() -> bool {
    true
}

fn default_tol() -> f64 {
    SolveOptions::default().tol
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            sigma: 0.01,
            lambdas: None,
            risk: RiskSpec::expectation(),
            include_offset: true,
            tol: default_tol(),
        }
    }
}

impl TrainConfig {
    pub fn with_risk(mut self, risk: RiskSpec) -> Self {
        self.risk = risk;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::param("sigma must be positive"));
        }
        if let Some(l) = &self.lambdas {
            if l.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(Error::param("class weights must be nonnegative"));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("solver tolerance must be positive"));
        }
        self.risk.validate()
    }

    /// Class weights for `data`.
    pub fn lambdas_for(&self, data: &Dataset) -> Result<Vec<f64>> {
        match &self.lambdas {
            Some(l) if l.len() != data.n_classes() => Err(Error::dim("class weights", data.n_classes(), l.len())),
            Some(l) => Ok(l.clone()),
            None => Ok(data.class_probs()),
        }
    }

    pub(crate) fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            ..SolveOptions::default()
        }
    }
}

/// Trains the single-program classifier. The last class's offset is pinned
/// at zero during the solve (offsets only enter through differences) and
/// the returned offsets are shifted to mean zero.
pub fn train_crammer_singer(data: &Dataset, cfg: &TrainConfig) -> Result<LinearModel> {
    cfg.validate()?;
    data.require_trainable()?;
    let lambdas = cfg.lambdas_for(data)?;
    let n_classes = data.n_classes();
    let n = data.feature_dim();

    let mut b = ProgramBuilder::new();
    let v: Vec<usize> = (0..n_classes).map(|_| b.free_vars(n).start).collect();
    for i in 0..n_classes {
        for k in 0..n {
            b.add_quad_term(v[i] + k, v[i] + k, cfg.sigma);
        }
    }
    let gamma: Vec<Option<usize>> = (0..n_classes)
        .map(|i| (cfg.include_offset && i + 1 < n_classes).then(|| b.free_vars(1).start))
        .collect();

    for i in 0..n_classes {
        let members = data.class_indices(i);
        let z: Vec<usize> = b.nonneg_vars(members.len(), 0.0).collect();
        for (&zl, &p) in z.iter().zip(members) {
            let x = data.point(p);
            for j in (0..n_classes).filter(|&j| j != i) {
                // z - <v^j - v^i, x> + gamma_j - gamma_i >= 1
                let mut row = Vec::with_capacity(2 * n + 3);
                row.push((zl, 1.0));
                for (k, &xk) in x.iter().enumerate() {
                    row.push((v[j] + k, -xk));
                    row.push((v[i] + k, xk));
                }
                if let Some(g) = gamma[j] {
                    row.push((g, 1.0));
                }
                if let Some(g) = gamma[i] {
                    row.push((g, -1.0));
                }
                b.add_row(&row, 1.0);
            }
        }
        let probs = vec![1.0 / members.len() as f64; members.len()];
        let expr = epigraph::risk_expr(&mut b, &z, &probs, &cfg.risk)?;
        epigraph::add_cost(&mut b, &expr, lambdas[i]);
    }

    let sol = solve(&b.build(), &cfg.solve_options())?.require_optimal("training the linear classifier")?;
    let weights: Vec<Vec<f64>> = v.iter().map(|&s| sol.x[s..s + n].to_vec()).collect();
    let mut offsets: Vec<f64> = gamma.iter().map(|g| g.map_or(0.0, |g| sol.x[g])).collect();
    center(&mut offsets);
    LinearModel::new(weights, offsets)
}

/// `sum_i lambda_i rho[Z_i] + sigma sum_i |v^i|^2` at a fixed model, with
/// the slacks recomputed from the data.
pub fn primal_objective(model: &LinearModel, data: &Dataset, cfg: &TrainConfig) -> Result<f64> {
    let lambdas = cfg.lambdas_for(data)?;
    let mut total = cfg.sigma * model.weight_norm_sq();
    for (z, l) in class_slacks(model, data)?.into_iter().zip(lambdas) {
        total += l * evaluate(&EmpiricalRV::uniform(z)?, &cfg.risk)?;
    }
    Ok(total)
}

pub(crate) fn center(offsets: &mut [f64]) {
    let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
    for g in offsets.iter_mut() {
        *g -= mean;
    }
}

/// Per-point slack `max(0, max_{j != i} psi_j(x) - psi_i(x) + 1)` for a
/// point of class `i` with scores `psi`.
pub fn hinge(scores: &[f64], class: usize) -> f64 {
    let own = scores[class];
    scores
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != class)
        .fold(0.0f64, |z, (_, &s)| z.max(s - own + 1.0))
}

/// Slacks of every point of every class at a fixed model.
pub fn class_slacks<C: Classifier + ?Sized>(model: &C, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    (0..data.n_classes())
        .map(|i| {
            data.class_points(i)
                .map(|x| model.scores(x).map(|s| hinge(&s, i)))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Dataset {
        Dataset::from_labels(vec![vec![-1.0], vec![1.0]], vec![0, 1], 2).unwrap()
    }

    #[test]
    fn separable_line() {
        let m = train_crammer_singer(&line(), &TrainConfig::default()).unwrap();
        assert_eq!(m.predict(&[-1.0]).unwrap(), 0);
        assert_eq!(m.predict(&[1.0]).unwrap(), 1);
        assert_eq!(m.predict(&[-0.5]).unwrap(), 0);
        let z = class_slacks(&m, &line()).unwrap();
        assert!(z.iter().flatten().all(|&v| v < 1e-6), "{z:?}");
    }

    #[test]
    fn identical_classes_force_unit_slack() {
        let d = Dataset::from_labels(vec![vec![0.5, 1.0]; 4], vec![0, 0, 1, 1], 2).unwrap();
        let m = train_crammer_singer(&d, &TrainConfig::default()).unwrap();
        assert!(m.weight_norm_sq() < 1e-8);
        for z in class_slacks(&m, &d).unwrap().iter().flatten() {
            assert!((z - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn msd_zero_matches_expectation() {
        let d = Dataset::from_labels(
            vec![
                vec![0.0, 1.0],
                vec![1.0, 0.2],
                vec![0.3, 0.4],
                vec![1.0, 1.0],
                vec![0.8, 0.1],
                vec![0.2, 0.9],
            ],
            vec![0, 1, 0, 1, 2, 2],
            3,
        )
        .unwrap();
        let a = train_crammer_singer(&d, &TrainConfig::default()).unwrap();
        let b = train_crammer_singer(&d, &TrainConfig::default().with_risk(RiskSpec::msd(0.0))).unwrap();
        for (x, y) in a.v.iter().flatten().zip(b.v.iter().flatten()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn prediction_examples() {
        let zero = LinearModel::zeros(3, 2);
        assert_eq!(zero.predict(&[1.0, 2.0]).unwrap(), 0);
        assert_eq!(decision_scores(&zero, &[1.0, 2.0]).unwrap(), vec![0.0; 3]);
        let m = LinearModel::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(m.predict(&[2.0, 0.0]).unwrap(), 0);
        let m = LinearModel::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(decision_scores(&m, &[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        let m = LinearModel::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![1.0, 0.0]).unwrap();
        assert_eq!(decision_scores(&m, &[0.0, 0.0]).unwrap(), vec![-1.0, 0.0]);
        assert!(matches!(m.predict(&[0.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn hinge_values() {
        assert_eq!(hinge(&[2.0, 0.0, 0.5], 0), 0.0);
        assert_eq!(hinge(&[0.0, 0.0], 1), 1.0);
        assert_eq!(hinge(&[0.0, 3.0], 0), 4.0);
    }

    #[test]
    fn serde_round_trip() {
        let m = LinearModel::new(vec![vec![1.5, -2.0], vec![0.0, 0.25]], vec![0.5, -0.5]).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("format_version"));
        assert_eq!(serde_json::from_str::<LinearModel>(&text).unwrap(), m);
    }
}
