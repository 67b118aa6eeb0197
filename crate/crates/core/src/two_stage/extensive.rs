use super::second_stage::augmented;
use super::TwoStageConfig;
use crate::data::Dataset;
use crate::epigraph;
use crate::error::Result;
use crate::solver::{solve, ProgramBuilder};

/// Optimal first-stage value from one monolithic program: every class's
/// slacks and inner-risk auxiliaries, epigraph variables `r_i` for the
/// class risks and the linear form of the outer measure over `r`.
pub fn extensive_form(data: &Dataset, cfg: &TwoStageConfig) -> Result<f64> {
    cfg.validate()?;
    data.require_trainable()?;
    let spec = cfg.resolved(data)?;
    let n_classes = data.n_classes();
    let dim = data.feature_dim() + 1;

    let mut b = ProgramBuilder::new();
    // offsets only enter through differences, so the last one is fixed at 0
    let theta: Vec<Vec<Option<usize>>> = (0..n_classes)
        .map(|i| {
            (0..dim)
                .map(|k| (i + 1 < n_classes || k + 1 < dim).then(|| b.free_vars(1).start))
                .collect()
        })
        .collect();
    if cfg.ridge > 0.0 {
        for block in &theta {
            for var in block[..dim - 1].iter().flatten() {
                b.add_quad_term(*var, *var, cfg.ridge);
            }
        }
    }

    let r: Vec<usize> = b.nonneg_vars(n_classes, 0.0).collect();
    for i in 0..n_classes {
        let members = data.class_indices(i);
        let z: Vec<usize> = b.nonneg_vars(members.len(), 0.0).collect();
        for (&zl, &p) in z.iter().zip(members) {
            let d = augmented(data.point(p));
            for j in (0..n_classes).filter(|&j| j != i) {
                // z >= <theta_j - theta_i, d> + 1
                let mut row = vec![(zl, 1.0)];
                for (k, &dk) in d.iter().enumerate() {
                    if let Some(v) = theta[j][k] {
                        row.push((v, -dk));
                    }
                    if let Some(v) = theta[i][k] {
                        row.push((v, dk));
                    }
                }
                b.add_row(&row, 1.0);
            }
        }
        let probs = vec![1.0 / members.len() as f64; members.len()];
        let inner = epigraph::risk_expr(&mut b, &z, &probs, &spec.inner)?;
        let mut row = vec![(r[i], 1.0)];
        row.extend(inner.iter().map(|&(v, c)| (v, -c)));
        b.add_row(&row, 0.0);
    }
    let outer = epigraph::risk_expr(&mut b, &r, &spec.class_probs, &spec.outer)?;
    epigraph::add_cost(&mut b, &outer, 1.0);

    let sol = solve(&b.build(), &cfg.solve_options())?.require_optimal("solving the extensive form")?;
    Ok(sol.objective)
}
