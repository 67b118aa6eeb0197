use super::Theta;
use crate::data::Dataset;
use crate::epigraph;
use crate::error::{Error, Result};
use crate::risk::RiskSpec;
use crate::solver::{dot, solve, ProgramBuilder, SolveOptions};

/// Optimal value of a class subproblem and a subgradient with respect to
/// every block of `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondStage {
    pub value: f64,
    /// `gradients[j]` is `g_ij`, of length `n + 1`.
    pub gradients: Vec<Vec<f64>>,
}

/// `R_i(theta) = min rho_i[Z_i]` subject to
/// `z_l >= <theta_j - theta_i, (x_l, -1)> + 1` for `j != i` and `z >= 0`.
///
/// With `pi_jl` the multipliers of these rows, `g_ij = D_i' pi_j` and
/// `g_ii = -sum_{j != i} g_ij`, where `D_i` holds the rows `(x_l, -1)`.
pub fn second_stage(theta: &Theta, class: usize, data: &Dataset, inner: &RiskSpec) -> Result<SecondStage> {
    second_stage_with(theta, class, data, inner, &SolveOptions::default())
}

pub(crate) fn second_stage_with(
    theta: &Theta,
    class: usize,
    data: &Dataset,
    inner: &RiskSpec,
    opts: &SolveOptions,
) -> Result<SecondStage> {
    let n_classes = data.n_classes();
    let dim = data.feature_dim() + 1;
    theta.check(n_classes, data.feature_dim())?;
    if class >= n_classes {
        return Err(Error::data(format!("class index {class} out of range")));
    }
    let members = data.class_indices(class);
    if members.is_empty() {
        return Err(Error::data(format!(
            "class {} has no points",
            data.class_names()[class]
        )));
    }
    let m = members.len();

    let mut b = ProgramBuilder::new();
    let z: Vec<usize> = b.nonneg_vars(m, 0.0).collect();
    let mut rows: Vec<(usize, usize, usize)> = Vec::with_capacity(m * (n_classes - 1));
    for (l, &p) in members.iter().enumerate() {
        let d = augmented(data.point(p));
        let own = dot(&theta.blocks[class], &d);
        for j in (0..n_classes).filter(|&j| j != class) {
            let rhs = dot(&theta.blocks[j], &d) - own + 1.0;
            let r = b.add_row(&[(z[l], 1.0)], rhs);
            rows.push((r, j, p));
        }
    }
    let probs = vec![1.0 / m as f64; m];
    let expr = epigraph::risk_expr(&mut b, &z, &probs, inner)?;
    epigraph::add_cost(&mut b, &expr, 1.0);
    let sol = solve(&b.build(), opts)?.require_optimal("solving a class subproblem")?;

    let mut gradients = vec![vec![0.0; dim]; n_classes];
    for &(r, j, p) in &rows {
        let pi = sol.duals[r];
        if pi == 0.0 {
            continue;
        }
        let x = data.point(p);
        for (k, &xk) in x.iter().enumerate() {
            gradients[j][k] += pi * xk;
            gradients[class][k] -= pi * xk;
        }
        gradients[j][dim - 1] -= pi;
        gradients[class][dim - 1] += pi;
    }
    Ok(SecondStage {
        value: sol.objective,
        gradients,
    })
}

/// `(x, -1)`.
pub(crate) fn augmented(x: &[f64]) -> Vec<f64> {
    let mut d = x.to_vec();
    d.push(-1.0);
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_without_violation() {
        let d = Dataset::from_labels(vec![vec![1.0], vec![-1.0]], vec![0, 1], 2).unwrap();
        let theta = Theta::from_model_parts(&[vec![1.0], vec![-1.0]], &[0.0, 0.0]);
        let s = second_stage(&theta, 0, &d, &RiskSpec::expectation()).unwrap();
        assert!(s.value.abs() < 1e-9);
    }

    #[test]
    fn equal_classifiers_give_unit_risk() {
        let d = Dataset::from_labels(vec![vec![0.3, 1.0], vec![2.0, -1.0], vec![0.0, 0.5]], vec![0, 1, 1], 2).unwrap();
        let theta = Theta::from_model_parts(&[vec![0.4, 0.2], vec![0.4, 0.2]], &[0.1, 0.1]);
        for class in 0..2 {
            for inner in [RiskSpec::expectation(), RiskSpec::msd(0.7), RiskSpec::avar(0.3)] {
                let s = second_stage(&theta, class, &d, &inner).unwrap();
                assert!((s.value - 1.0).abs() < 1e-9);
            }
        }
    }
}
