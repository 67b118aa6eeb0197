//! Linear-programming representations of the polyhedral risk measures.
//!
//! [`risk_expr`] takes variables `x_1..x_m` of a program under assembly
//! and returns a linear expression `e` (plus auxiliary variables and rows)
//! such that minimizing any nondecreasing function of `e` over the
//! auxiliaries yields exactly `rho[X]` for the discrete distribution
//! `P(X = x_l) = probs_l`.
//!
//! * Expectation: `sum p_l x_l`.
//! * Mean-upper-semideviation of order 1:
//!   `sum p_l x_l + c sum p_l y_l`, `y_l >= x_l - t`, `t <= sum p_l x_l`, `y >= 0`.
//! * AVaR at level alpha: `eta + (1/alpha) sum p_l u_l`, `u_l >= x_l - eta`, `u >= 0`.

use crate::error::{Error, Result};
use crate::risk::{RiskKind, RiskSpec};
use crate::solver::ProgramBuilder;

pub(crate) type LinExpr = Vec<(usize, f64)>;

pub(crate) fn risk_expr(b: &mut ProgramBuilder, x: &[usize], probs: &[f64], spec: &RiskSpec) -> Result<LinExpr> {
    debug_assert_eq!(x.len(), probs.len());
    spec.validate()?;
    let mean: LinExpr = x.iter().zip(probs).map(|(&v, &p)| (v, p)).collect();
    match spec.kind {
        RiskKind::Expectation => Ok(mean),
        RiskKind::MeanSemiDeviation => {
            if spec.p_order != 1 {
                return Err(Error::Unsupported(format!(
                    "semideviation of order {} has no linear representation",
                    spec.p_order
                )));
            }
            if spec.c == 0.0 {
                return Ok(mean);
            }
            let t = b.free_vars(1).start;
            let mut row = mean.clone();
            row.push((t, -1.0));
            b.add_row(&row, 0.0);
            let y = b.nonneg_vars(x.len(), 0.0);
            let mut expr = mean;
            for ((yl, &xl), &p) in y.zip(x).zip(probs) {
                b.add_row(&[(yl, 1.0), (xl, -1.0), (t, 1.0)], 0.0);
                expr.push((yl, spec.c * p));
            }
            Ok(expr)
        }
        RiskKind::AVaR => {
            if spec.alpha == 1.0 {
                return Ok(mean);
            }
            let eta = b.free_vars(1).start;
            let u = b.nonneg_vars(x.len(), 0.0);
            let mut expr = vec![(eta, 1.0)];
            for ((ul, &xl), &p) in u.zip(x).zip(probs) {
                b.add_row(&[(ul, 1.0), (xl, -1.0), (eta, 1.0)], 0.0);
                expr.push((ul, p / spec.alpha));
            }
            Ok(expr)
        }
    }
}

/// Adds `weight * e` to the objective.
pub(crate) fn add_cost(b: &mut ProgramBuilder, expr: &LinExpr, weight: f64) {
    for &(v, c) in expr {
        b.add_cost(v, weight * c);
    }
}
