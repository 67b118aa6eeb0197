use nalgebra::{DMatrix, DVector};

use super::{Candidate, QuadProgram};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Row {
    General(usize),
    Lower(usize),
    Upper(usize),
}

const MAX_ROUNDS: usize = 6;

/// Refines an interior-point iterate by solving the KKT system on a guessed
/// active set, adjusting the set a few times if multipliers come out
/// negative or inactive rows become violated.
pub(crate) fn polish(p: &QuadProgram, start: &Candidate) -> Option<Candidate> {
    let n = p.n_vars();
    let rows = p.cons.row_lists();
    let ax = p.cons.mul_vec(&start.x);

    let mut all = Vec::new();
    let mut active = Vec::new();
    for i in 0..p.n_cons() {
        all.push(Row::General(i));
        if start.duals[i] > ax[i] - p.rhs[i] {
            active.push(Row::General(i));
        }
    }
    for j in 0..n {
        let lo = p.lower.as_ref().map_or(f64::NEG_INFINITY, |l| l[j]);
        if lo.is_finite() {
            all.push(Row::Lower(j));
            if start.lower_duals[j] > start.x[j] - lo {
                active.push(Row::Lower(j));
            }
        }
        let hi = p.upper.as_ref().map_or(f64::INFINITY, |u| u[j]);
        if hi.is_finite() {
            all.push(Row::Upper(j));
            if start.upper_duals[j] > hi - start.x[j] {
                active.push(Row::Upper(j));
            }
        }
    }

    let row_coefs = |r: Row| -> (Vec<(usize, f64)>, f64) {
        match r {
            Row::General(i) => (rows[i].clone(), p.rhs[i]),
            Row::Lower(j) => (vec![(j, 1.0)], p.lower.as_ref().unwrap()[j]),
            Row::Upper(j) => (vec![(j, -1.0)], -p.upper.as_ref().unwrap()[j]),
        }
    };

    let q_rows = p.quad.row_lists();
    let mut best: Option<Candidate> = None;
    for _ in 0..MAX_ROUNDS {
        let k = active.len();
        if k > n {
            // degenerate vertex: the KKT system would be singular
            break;
        }
        let dim = n + k;
        let mut kkt = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for (i, row) in q_rows.iter().enumerate() {
            for &(j, v) in row {
                kkt[(i, j)] += v;
            }
            rhs[i] = -p.linear[i];
        }
        for (c, &r) in active.iter().enumerate() {
            let (coefs, b) = row_coefs(r);
            for (j, v) in coefs {
                kkt[(n + c, j)] = v;
                kkt[(j, n + c)] = -v;
            }
            rhs[n + c] = b;
        }
        let sol = kkt
            .clone()
            .lu()
            .solve(&rhs)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .or_else(|| kkt.svd(true, true).solve(&rhs, 1e-12).ok())?;

        let x: Vec<f64> = sol.rows(0, n).iter().copied().collect();
        let mut duals = vec![0.0; p.n_cons()];
        let mut lower_duals = vec![0.0; n];
        let mut upper_duals = vec![0.0; n];
        let mut negative = Vec::new();
        for (c, &r) in active.iter().enumerate() {
            let lam = sol[n + c];
            if lam < 0.0 {
                negative.push((lam, r));
            }
            let lam = lam.max(0.0);
            match r {
                Row::General(i) => duals[i] = lam,
                Row::Lower(j) => lower_duals[j] = lam,
                Row::Upper(j) => upper_duals[j] = lam,
            }
        }
        let residual = p.residuals(&x, &duals, &lower_duals, &upper_duals).max();
        let cand = Candidate {
            x,
            duals,
            lower_duals,
            upper_duals,
            residual,
        };

        // adjust the active set: add the most violated row, drop the most negative multiplier
        let mut worst_violation = (0.0, None);
        for &r in &all {
            if active.contains(&r) {
                continue;
            }
            let (coefs, b) = row_coefs(r);
            let lhs: f64 = coefs.iter().map(|&(j, v)| v * cand.x[j]).sum();
            let viol = b - lhs;
            if viol > worst_violation.0 {
                worst_violation = (viol, Some(r));
            }
        }
        let better = best.as_ref().map_or(true, |b| cand.residual < b.residual);
        if better {
            best = Some(cand);
        }
        let mut changed = false;
        if let Some(r) = worst_violation.1 {
            if worst_violation.0 > 1e-12 {
                active.push(r);
                changed = true;
            }
        }
        negative.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(&(lam, r)) = negative.first() {
            if lam < -1e-12 {
                active.retain(|&a| a != r);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    best
}
