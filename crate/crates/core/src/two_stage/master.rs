use super::{Cut, SolverState, Theta, TwoStageConfig};
use crate::error::{Error, Result};
use crate::solver::{dot, solve, ProgramBuilder};

/// Optimum of the regularized master program.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterSolution {
    /// Cutting-plane model value at `theta` (`alpha`, plus the ridge term
    /// when one is configured).
    pub alpha: f64,
    pub theta: Theta,
    pub r: Vec<f64>,
}

/// Solves
///
/// ```text
///     min  alpha + ridge sum_i |v^i|^2 + sigma |theta - w|^2
///     s.t. alpha >= sum_i mu_i r_i                          (objective cuts)
///          r_i >= R_i + sum_j <g_ij, theta_j - theta_j^k>     (scenario cuts)
///          alpha, r >= 0
/// ```
pub fn solve_master(state: &SolverState, cfg: &TwoStageConfig) -> Result<MasterSolution> {
    let n_classes = state.w.blocks.len();
    let dim = state.w.blocks.first().map_or(0, Vec::len);
    if state.cuts.is_empty() {
        return Err(Error::data("master program needs at least one cut"));
    }
    let sigma = cfg.prox_sigma;

    let mut b = ProgramBuilder::new();
    let alpha = b.add_var(1.0, 0.0, f64::INFINITY);
    let r: Vec<usize> = b.nonneg_vars(n_classes, 0.0).collect();
    let theta: Vec<usize> = (0..n_classes).map(|_| b.free_vars(dim).start).collect();
    for (i, &start) in theta.iter().enumerate() {
        for k in 0..dim {
            let var = start + k;
            let w = state.w.blocks[i][k];
            let ridge = if k + 1 < dim { cfg.ridge } else { 0.0 };
            b.add_quad_term(var, var, sigma + ridge);
            b.add_cost(var, -2.0 * sigma * w);
            b.add_constant(sigma * w * w);
        }
    }
    for cut in state.cuts.iter() {
        match cut {
            Cut::Objective { mu } => {
                let mut row = vec![(alpha, 1.0)];
                row.extend(r.iter().zip(mu).map(|(&ri, &m)| (ri, -m)));
                b.add_row(&row, 0.0);
            }
            Cut::Scenario {
                class,
                value,
                gradients,
                anchor,
            } => {
                let mut row = vec![(r[*class], 1.0)];
                let mut rhs = *value;
                for (j, g) in gradients.iter().enumerate() {
                    rhs -= dot(g, &anchor.blocks[j]);
                    row.extend(g.iter().enumerate().map(|(k, &gk)| (theta[j] + k, -gk)));
                }
                b.add_row(&row, rhs);
            }
        }
    }
    let sol = solve(&b.build(), &cfg.solve_options())?.require_optimal("solving the master program")?;
    let blocks: Vec<Vec<f64>> = theta.iter().map(|&s| sol.x[s..s + dim].to_vec()).collect();
    let next = Theta { blocks };
    Ok(MasterSolution {
        alpha: sol.x[alpha] + cfg.ridge * next.weight_norm_sq(),
        r: r.iter().map(|&i| sol.x[i]).collect(),
        theta: next,
    })
}
