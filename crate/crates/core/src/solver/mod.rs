//! Convex quadratic and linear programs with inequality constraints.
//!
//! Problems have the form
//!
//! ```text
//!     minimize    1/2 x'Qx + q'x
//!     subject to  A x >= b
//!                 lower <= x <= upper
//! ```
//!
//! with `Q` symmetric positive semidefinite. Every program is solved by a
//! primal-dual interior-point method (the `clarabel` crate). Small problems
//! are then polished: the active set read off the interior-point iterate is
//! fixed and the equality-constrained KKT system is solved directly, which
//! brings the residuals down to rounding level. See `README.md` in this
//! directory for the residual definitions.

mod builder;
mod dump;
mod polish;
mod sparse;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use builder::ProgramBuilder;
pub use sparse::SparseMatrix;

/// Problems with at most this many variables plus constraint rows are polished.
const POLISH_LIMIT: usize = 700;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadProgram {
    /// `Q`, symmetric PSD, `n x n`.
    pub quad: SparseMatrix,
    /// `q`, length `n`.
    pub linear: Vec<f64>,
    /// `A`, `m x n`; rows read `A x >= b`.
    pub cons: SparseMatrix,
    /// `b`, length `m`.
    pub rhs: Vec<f64>,
    /// Per-variable lower bounds; `-inf` entries are absent bounds.
    pub lower: Option<Vec<f64>>,
    /// Per-variable upper bounds; `+inf` entries are absent bounds.
    pub upper: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    /// One nonnegative multiplier per row of `A`.
    pub duals: Vec<f64>,
    /// Multipliers of the lower bounds (zero where absent).
    pub lower_duals: Vec<f64>,
    /// Multipliers of the upper bounds (zero where absent).
    pub upper_duals: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub kkt_residual: f64,
    pub iterations: u32,
    pub polished: bool,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Errors unless the solve reached optimality.
    pub fn require_optimal(self, context: &'static str) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::Solver {
                context,
                status: self.status,
                residual: self.kkt_residual,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// Scaled KKT residuals of a primal-dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.complementarity)
    }
}

impl QuadProgram {
    pub fn n_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn n_cons(&self) -> usize {
        self.rhs.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let qx = self.quad.mul_vec(x);
        0.5 * dot(x, &qx) + dot(&self.linear, x)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.quad.nrows() != n || self.quad.ncols() != n {
            return Err(Error::dim("quadratic term", n, self.quad.nrows()));
        }
        if self.cons.ncols() != n {
            return Err(Error::dim("constraint columns", n, self.cons.ncols()));
        }
        if self.cons.nrows() != self.rhs.len() {
            return Err(Error::dim("constraint rows", self.cons.nrows(), self.rhs.len()));
        }
        for bounds in [&self.lower, &self.upper].into_iter().flatten() {
            if bounds.len() != n {
                return Err(Error::dim("variable bounds", n, bounds.len()));
            }
        }
        let finite_data = self.linear.iter().all(|v| v.is_finite())
            && self.rhs.iter().all(|v| v.is_finite())
            && self.quad.entries().iter().all(|e| e.2.is_finite())
            && self.cons.entries().iter().all(|e| e.2.is_finite());
        if !finite_data {
            return Err(Error::param("program data must be finite"));
        }
        if let (Some(lo), Some(hi)) = (&self.lower, &self.upper) {
            if lo.iter().zip(hi).any(|(l, u)| l > u) {
                return Err(Error::param("lower bound exceeds upper bound"));
            }
        }
        check_symmetric_psd(&self.quad)
    }

    fn lower_at(&self, j: usize) -> f64 {
        self.lower.as_ref().map_or(f64::NEG_INFINITY, |l| l[j])
    }

    fn upper_at(&self, j: usize) -> f64 {
        self.upper.as_ref().map_or(f64::INFINITY, |u| u[j])
    }

    /// Residuals at `(x, duals)` scaled by the magnitude of the terms involved.
    pub fn residuals(&self, x: &[f64], duals: &[f64], lower_duals: &[f64], upper_duals: &[f64]) -> Residuals {
        let n = self.n_vars();
        let ax = self.cons.mul_vec(x);
        let mut viol = 0.0f64;
        let mut scale_p = 0.0f64;
        let mut compl = 0.0;
        let mut neg_dual = 0.0f64;
        for i in 0..self.n_cons() {
            let s = ax[i] - self.rhs[i];
            viol = viol.max(-s);
            scale_p = scale_p.max(ax[i].abs()).max(self.rhs[i].abs());
            compl += duals[i] * s;
            neg_dual = neg_dual.max(-duals[i]);
        }
        for j in 0..n {
            let (lo, hi) = (self.lower_at(j), self.upper_at(j));
            if lo.is_finite() {
                let s = x[j] - lo;
                viol = viol.max(-s);
                scale_p = scale_p.max(lo.abs()).max(x[j].abs());
                compl += lower_duals[j] * s;
            }
            if hi.is_finite() {
                let s = hi - x[j];
                viol = viol.max(-s);
                scale_p = scale_p.max(hi.abs()).max(x[j].abs());
                compl += upper_duals[j] * s;
            }
            neg_dual = neg_dual.max(-lower_duals[j]).max(-upper_duals[j]);
        }

        let qx = self.quad.mul_vec(x);
        let aty = self.cons.tmul_vec(duals);
        let mut stat = 0.0f64;
        let mut scale_d = 0.0f64;
        for j in 0..n {
            let r = qx[j] + self.linear[j] - aty[j] - lower_duals[j] + upper_duals[j];
            stat = stat.max(r.abs());
            scale_d = scale_d.max(qx[j].abs()).max(self.linear[j].abs()).max(aty[j].abs());
        }
        let b_inf = self.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let obj = self.objective(x).abs();
        Residuals {
            primal: viol.max(0.0) / (1.0 + scale_p),
            dual: stat.max(neg_dual) / (1.0 + scale_d),
            complementarity: compl.abs() / (1.0 + b_inf.max(obj)),
        }
    }
}

fn check_symmetric_psd(q: &SparseMatrix) -> Result<()> {
    let rows = q.row_lists();
    let scale = 1.0 + q.max_abs();
    let mut support = vec![false; q.nrows()];
    let mut diagonal = true;
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            if v == 0.0 {
                continue;
            }
            let vt = rows[j]
                .binary_search_by_key(&i, |e| e.0)
                .map(|k| rows[j][k].1)
                .unwrap_or(0.0);
            if (v - vt).abs() > 1e-10 * scale {
                return Err(Error::param(format!("quadratic term is not symmetric at ({i},{j})")));
            }
            support[i] = true;
            support[j] = true;
            if i != j {
                diagonal = false;
            }
        }
    }
    if diagonal {
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|&(j, v)| j == i && v < -1e-10 * scale) {
                return Err(Error::param("quadratic term is not positive semidefinite"));
            }
        }
        return Ok(());
    }
    let idx: Vec<usize> = (0..q.nrows()).filter(|&i| support[i]).collect();
    let mut pos = vec![usize::MAX; q.nrows()];
    for (k, &i) in idx.iter().enumerate() {
        pos[i] = k;
    }
    let k = idx.len();
    let shift = 1e-9 * scale;
    let mut dense = nalgebra::DMatrix::<f64>::identity(k, k) * shift;
    for &i in &idx {
        for &(j, v) in &rows[i] {
            dense[(pos[i], pos[j])] += v;
        }
    }
    if nalgebra::Cholesky::new(dense).is_none() {
        return Err(Error::param("quadratic term is not positive semidefinite"));
    }
    Ok(())
}

/// Solves `p`. Invalid problems (dimensions, non-finite data, asymmetric or
/// indefinite `Q`) are errors; solver outcomes are reported in the status.
pub fn solve(p: &QuadProgram, opts: &SolveOptions) -> Result<Solution> {
    if !(opts.tol > 0.0) {
        return Err(Error::param("solver tolerance must be positive"));
    }
    p.validate()?;
    let n = p.n_vars();
    let m = p.n_cons();

    // Clarabel form: A_c x + s = b_c, s >= 0. Rows: constraints, lower, upper.
    let mut ti = Vec::new();
    let mut tj = Vec::new();
    let mut tv = Vec::new();
    let mut b_c = Vec::with_capacity(m);
    for &(i, j, v) in p.cons.entries() {
        ti.push(i);
        tj.push(j);
        tv.push(-v);
    }
    b_c.extend(p.rhs.iter().map(|b| -b));
    let mut lower_rows = Vec::new();
    let mut upper_rows = Vec::new();
    for j in 0..n {
        let lo = p.lower_at(j);
        if lo.is_finite() {
            lower_rows.push((j, b_c.len()));
            ti.push(b_c.len());
            tj.push(j);
            tv.push(-1.0);
            b_c.push(-lo);
        }
    }
    for j in 0..n {
        let hi = p.upper_at(j);
        if hi.is_finite() {
            upper_rows.push((j, b_c.len()));
            ti.push(b_c.len());
            tj.push(j);
            tv.push(1.0);
            b_c.push(hi);
        }
    }
    let rows = b_c.len();
    let a_c = CscMatrix::new_from_triplets(rows, n, ti, tj, tv);

    let (mut pi, mut pj, mut pv) = (Vec::new(), Vec::new(), Vec::new());
    for &(i, j, v) in p.quad.entries() {
        if i <= j {
            pi.push(i);
            pj.push(j);
            pv.push(v);
        }
    }
    let p_c = CscMatrix::new_from_triplets(n, n, pi, pj, pv);

    let cones = if rows > 0 {
        vec![SupportedConeT::NonnegativeConeT(rows)]
    } else {
        Vec::new()
    };

    let mut best: Option<Candidate> = None;
    let mut iterations = 0;
    let mut polished = false;
    for inner_tol in [opts.tol * 0.1, opts.tol * 1e-3] {
        let settings = DefaultSettings {
            max_iter: opts.max_iter,
            verbose: false,
            tol_gap_abs: inner_tol,
            tol_gap_rel: inner_tol,
            tol_feas: inner_tol,
            tol_ktratio: 1e-7,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p_c, &p.linear, &a_c, &b_c, &cones, settings)
            .map_err(|e| Error::param(format!("solver setup failed: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        iterations += sol.iterations;

        let status = match sol.status {
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Some(SolveStatus::Infeasible),
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Some(SolveStatus::Unbounded),
            _ => None,
        };

        let x: Vec<f64> = sol.x.clone();
        let mut duals = sol.z[..m].to_vec();
        let mut lower_duals = vec![0.0; n];
        let mut upper_duals = vec![0.0; n];
        for &(j, r) in &lower_rows {
            lower_duals[j] = sol.z[r];
        }
        for &(j, r) in &upper_rows {
            upper_duals[j] = sol.z[r];
        }
        for d in duals
            .iter_mut()
            .chain(lower_duals.iter_mut())
            .chain(upper_duals.iter_mut())
        {
            *d = d.max(0.0);
        }

        if let Some(status) = status {
            if best.is_some() {
                break;
            }
            return Ok(Solution {
                objective: f64::NAN,
                x,
                duals,
                lower_duals,
                upper_duals,
                status,
                kkt_residual: f64::INFINITY,
                iterations,
                polished: false,
            });
        }

        let mut cand = Candidate {
            residual: p.residuals(&x, &duals, &lower_duals, &upper_duals).max(),
            x,
            duals,
            lower_duals,
            upper_duals,
        };
        let mut cand_polished = false;
        if n + rows <= POLISH_LIMIT && cand.x.iter().all(|v| v.is_finite()) {
            if let Some(c) = polish::polish(p, &cand) {
                if c.residual < cand.residual {
                    cand = c;
                    cand_polished = true;
                }
            }
        }
        if best.as_ref().is_none_or(|b| cand.residual < b.residual) {
            best = Some(cand);
            polished = cand_polished;
        }
        if best.as_ref().is_some_and(|b| b.residual <= opts.tol) {
            break;
        }
    }
    let best = best.expect("at least one solve attempt");

    let status = if best.residual <= opts.tol && best.x.iter().all(|v| v.is_finite()) {
        SolveStatus::Optimal
    } else {
        SolveStatus::IterLimit
    };
    Ok(Solution {
        objective: p.objective(&best.x),
        x: best.x,
        duals: best.duals,
        lower_duals: best.lower_duals,
        upper_duals: best.upper_duals,
        status,
        kkt_residual: best.residual,
        iterations,
        polished,
    })
}

#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub lower_duals: Vec<f64>,
    pub upper_duals: Vec<f64>,
    pub residual: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
