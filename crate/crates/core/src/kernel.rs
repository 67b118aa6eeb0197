//! Kernel classifiers trained through the Lagrangian dual.
//!
//! Offsets are dropped. With multipliers `mu^i_{j,l} >= 0` on the margin
//! constraints of point `l` of class `i` against class `j`, and `delta^i_l`
//! on the semideviation constraints, the dual reads
//!
//! ```text
//!     max  sum mu - 1/(4 sigma) sum_i c_i' K c_i
//!     s.t. lambda_i/m_i - sum_j mu^i_{j,l} + delta^i_l - mean_l(delta^i) >= 0
//!          0 <= delta^i_l <= c lambda_i / m_i
//! ```
//!
//! where `c_i` collects, over all training points `p`, the coefficient of
//! `phi(x_p)` in `2 sigma v^i`: `sum_{j != i} mu^i_{j,p}` for `p` in class
//! `i` and `-mu^j_{i,p}` for `p` in class `j != i`. The program is solved as
//! the minimization of the negated objective.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{Classifier, TrainConfig, MODEL_FORMAT_VERSION};
use crate::risk::RiskKind;
use crate::solver::{dot, solve, ProgramBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
    Laplacian,
    Polynomial,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "default_degree")]
    pub degree: u32,
    #[serde(default)]
    pub coef0: f64,
}

fn one() -> f64 {
    1.0
}

fn default_degree() -> u32 {
    2
}

impl KernelSpec {
    fn of(kind: KernelKind, gamma: f64) -> Self {
        KernelSpec {
            kind,
            gamma,
            degree: default_degree(),
            coef0: 0.0,
        }
    }

    pub fn linear() -> Self {
        Self::of(KernelKind::Linear, 1.0)
    }

    pub fn rbf(gamma: f64) -> Self {
        Self::of(KernelKind::Rbf, gamma)
    }

    pub fn laplacian(gamma: f64) -> Self {
        Self::of(KernelKind::Laplacian, gamma)
    }

    /// `(gamma <x, y> + coef0)^degree`.
    pub fn polynomial(gamma: f64, degree: u32, coef0: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Polynomial,
            gamma,
            degree,
            coef0,
        }
    }

    pub fn cosine() -> Self {
        Self::of(KernelKind::Cosine, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let needs_gamma = matches!(
            self.kind,
            KernelKind::Rbf | KernelKind::Laplacian | KernelKind::Polynomial
        );
        if needs_gamma && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::param("kernel gamma must be positive"));
        }
        if self.kind == KernelKind::Polynomial && self.degree == 0 {
            return Err(Error::param("polynomial degree must be at least 1"));
        }
        if !self.coef0.is_finite() {
            return Err(Error::param("kernel coef0 must be finite"));
        }
        Ok(())
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => dot(a, b),
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * d2).exp()
            }
            KernelKind::Laplacian => {
                let d1: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
                (-self.gamma * d1).exp()
            }
            KernelKind::Polynomial => (self.gamma * dot(a, b) + self.coef0).powi(self.degree as i32),
            KernelKind::Cosine => {
                let na = dot(a, a).sqrt();
                let nb = dot(b, b).sqrt();
                if na == 0.0 || nb == 0.0 {
                    0.0
                } else {
                    dot(a, b) / (na * nb)
                }
            }
        }
    }
}

/// Matrix of `K(a_k, b_l)`.
pub fn gram(a: &[Vec<f64>], b: &[Vec<f64>], spec: &KernelSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let dim = a.first().or(b.first()).map_or(0, Vec::len);
    for x in a.iter().chain(b) {
        if x.len() != dim {
            return Err(Error::dim("gram matrix", dim, x.len()));
        }
    }
    Ok(DMatrix::from_fn(a.len(), b.len(), |k, l| spec.eval(&a[k], &b[l])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelModelRepr", into = "KernelModelRepr")]
pub struct KernelModel {
    /// `mu_hat[i][j][l]`: multiplier of point `l` of class `i` against
    /// class `j` (empty for `j == i`).
    mu_hat: Vec<Vec<Vec<f64>>>,
    support: Dataset,
    spec: KernelSpec,
    sigma: f64,
    dual_objective: f64,
    /// `coef[i][p]`: coefficient of `K(x_p, .)` in `2 sigma psi_i`.
    coef: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct KernelModelRepr {
    format_version: u32,
    spec: KernelSpec,
    sigma: f64,
    dual_objective: f64,
    mu_hat: Vec<Vec<Vec<f64>>>,
    support: Dataset,
}

impl TryFrom<KernelModelRepr> for KernelModel {
    type Error = Error;

    fn try_from(r: KernelModelRepr) -> Result<Self> {
        if r.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::data(format!(
                "unsupported model format version {}",
                r.format_version
            )));
        }
        KernelModel::from_parts(r.mu_hat, r.support, r.spec, r.sigma, r.dual_objective)
    }
}

impl From<KernelModel> for KernelModelRepr {
    fn from(m: KernelModel) -> Self {
        KernelModelRepr {
            format_version: MODEL_FORMAT_VERSION,
            spec: m.spec,
            sigma: m.sigma,
            dual_objective: m.dual_objective,
            mu_hat: m.mu_hat,
            support: m.support,
        }
    }
}

impl KernelModel {
    pub fn from_parts(
        mu_hat: Vec<Vec<Vec<f64>>>,
        support: Dataset,
        spec: KernelSpec,
        sigma: f64,
        dual_objective: f64,
    ) -> Result<Self> {
        spec.validate()?;
        if !(sigma > 0.0) {
            return Err(Error::param("sigma must be positive"));
        }
        let n_classes = support.n_classes();
        if mu_hat.len() != n_classes {
            return Err(Error::dim("multiplier blocks", n_classes, mu_hat.len()));
        }
        let mut coef = vec![vec![0.0; support.len()]; n_classes];
        for (i, blocks) in mu_hat.iter().enumerate() {
            if blocks.len() != n_classes {
                return Err(Error::dim("multiplier blocks", n_classes, blocks.len()));
            }
            let members = support.class_indices(i);
            for (j, block) in blocks.iter().enumerate() {
                let expected = if j == i { 0 } else { members.len() };
                if block.len() != expected {
                    return Err(Error::dim("multiplier block", expected, block.len()));
                }
                if block.iter().any(|m| !(*m >= -1e-9 && m.is_finite())) {
                    return Err(Error::data("multipliers must be nonnegative"));
                }
                for (&p, &mu) in members.iter().zip(block) {
                    coef[i][p] += mu;
                    coef[j][p] -= mu;
                }
            }
        }
        Ok(KernelModel {
            mu_hat,
            support,
            spec,
            sigma,
            dual_objective,
            coef,
        })
    }

    pub fn mu_hat(&self) -> &[Vec<Vec<f64>>] {
        &self.mu_hat
    }

    pub fn support(&self) -> &Dataset {
        &self.support
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Optimal value of the dual program.
    pub fn dual_objective(&self) -> f64 {
        self.dual_objective
    }

    /// Per-class expansion coefficients over the support points.
    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coef
    }
}

impl Classifier for KernelModel {
    fn n_classes(&self) -> usize {
        self.coef.len()
    }

    fn n_features(&self) -> usize {
        self.support.feature_dim()
    }

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        kernel_scores(self, x)
    }
}

/// `psi_i(x) = 1/(2 sigma) sum_p coef[i][p] K(x_p, x)` for every class.
pub fn kernel_scores(model: &KernelModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.n_features() {
        return Err(Error::dim("kernel scores", model.n_features(), x.len()));
    }
    let k: Vec<f64> = model.support.points().iter().map(|p| model.spec.eval(p, x)).collect();
    let scale = 1.0 / (2.0 * model.sigma);
    Ok(model.coef.iter().map(|c| scale * dot(c, &k)).collect())
}

/// Solves the dual program. The inner risk must be the expectation or the
/// order-1 semideviation; offsets are never fitted.
pub fn train_kernel(data: &Dataset, cfg: &TrainConfig, spec: &KernelSpec) -> Result<KernelModel> {
    cfg.validate()?;
    spec.validate()?;
    data.require_trainable()?;
    let c = match cfg.risk.kind {
        RiskKind::Expectation => 0.0,
        RiskKind::MeanSemiDeviation if cfg.risk.p_order == 1 => cfg.risk.c,
        _ => {
            return Err(Error::Unsupported(
                "kernel training needs the expectation or the order-1 semideviation".into(),
            ))
        }
    };
    let lambdas = cfg.lambdas_for(data)?;
    let n_classes = data.n_classes();
    let k = gram(data.points(), data.points(), spec)?;

    // mu variables: (class i, class j, point p) with p in class i
    let mut b = ProgramBuilder::new();
    let mut mu_vars: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); n_classes]; n_classes];
    let mut owner: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..n_classes {
        for j in (0..n_classes).filter(|&j| j != i) {
            for &p in data.class_indices(i) {
                mu_vars[i][j].push(b.add_var(-1.0, 0.0, f64::INFINITY));
                owner.push((i, j, p));
            }
        }
    }
    let n_mu = owner.len();
    let scale = 1.0 / (2.0 * cfg.sigma);
    for a in 0..n_mu {
        let (ia, ja, pa) = owner[a];
        for bb in a..n_mu {
            let (ib, jb, pb) = owner[bb];
            // sum over classes shared by the two supports, with signs
            let mut s = 0.0;
            if ia == ib {
                s += 1.0;
            }
            if ja == jb {
                s += 1.0;
            }
            if ia == jb {
                s -= 1.0;
            }
            if ja == ib {
                s -= 1.0;
            }
            if s == 0.0 {
                continue;
            }
            let v = scale * s * k[(pa, pb)];
            if v == 0.0 {
                continue;
            }
            b.add_q_entry(a, bb, v);
            if a != bb {
                b.add_q_entry(bb, a, v);
            }
        }
    }

    for i in 0..n_classes {
        let members = data.class_indices(i);
        let m = members.len() as f64;
        let cap = c * lambdas[i] / m;
        let delta: Option<Vec<usize>> = (cap > 0.0).then(|| b.add_vars(members.len(), 0.0, 0.0, cap).collect());
        for l in 0..members.len() {
            let mut row: Vec<(usize, f64)> = (0..n_classes)
                .filter(|&j| j != i)
                .map(|j| (mu_vars[i][j][l], -1.0))
                .collect();
            if let Some(d) = &delta {
                for (k2, &dv) in d.iter().enumerate() {
                    let coef = if k2 == l { 1.0 - 1.0 / m } else { -1.0 / m };
                    row.push((dv, coef));
                }
            }
            b.add_row(&row, -lambdas[i] / m);
        }
    }

    let sol = solve(&b.build(), &cfg.solve_options())?.require_optimal("training the kernel classifier")?;
    let mu_hat: Vec<Vec<Vec<f64>>> = mu_vars
        .iter()
        .map(|blocks| {
            blocks
                .iter()
                .map(|vars| vars.iter().map(|&v| sol.x[v].max(0.0)).collect())
                .collect()
        })
        .collect();
    KernelModel::from_parts(mu_hat, data.clone(), *spec, cfg.sigma, -sol.objective)
}
