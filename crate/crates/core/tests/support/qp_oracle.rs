//! Brute-force active-set oracle for small convex programs.
//!
//! Every subset of constraint rows (general rows plus finite bounds) is
//! treated as a set of equalities; the resulting KKT system is solved
//! directly and the best feasible candidate is kept. Exact for strictly
//! convex QPs and for LPs with a bounded feasible region.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use riskclass::solver::{QuadProgram, SparseMatrix};

pub struct OracleSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

fn all_rows(p: &QuadProgram) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = p.n_vars();
    let mut rows = p.cons.to_dense();
    let mut rhs = p.rhs.clone();
    if let Some(lo) = &p.lower {
        for j in 0..n {
            if lo[j].is_finite() {
                let mut r = vec![0.0; n];
                r[j] = 1.0;
                rows.push(r);
                rhs.push(lo[j]);
            }
        }
    }
    if let Some(hi) = &p.upper {
        for j in 0..n {
            if hi[j].is_finite() {
                let mut r = vec![0.0; n];
                r[j] = -1.0;
                rows.push(r);
                rhs.push(-hi[j]);
            }
        }
    }
    (rows, rhs)
}

pub fn brute_force(p: &QuadProgram) -> Option<OracleSolution> {
    let n = p.n_vars();
    let (rows, rhs) = all_rows(p);
    let m = rows.len();
    assert!(m <= 16, "oracle is exponential in the row count");
    let q = p.quad.to_dense();
    let mut best: Option<OracleSolution> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let k = active.len();
        if k > n {
            continue;
        }
        let dim = n + k;
        let mut kkt = DMatrix::<f64>::zeros(dim, dim);
        let mut b = DVector::<f64>::zeros(dim);
        for i in 0..n {
            for j in 0..n {
                kkt[(i, j)] = q[i][j];
            }
            b[i] = -p.linear[i];
        }
        for (c, &r) in active.iter().enumerate() {
            for j in 0..n {
                kkt[(n + c, j)] = rows[r][j];
                kkt[(j, n + c)] = -rows[r][j];
            }
            b[n + c] = rhs[r];
        }
        let lu = kkt.lu();
        if lu.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(sol) = lu.solve(&b) else { continue };
        let x: Vec<f64> = sol.rows(0, n).iter().copied().collect();
        let feasible = rows
            .iter()
            .zip(&rhs)
            .all(|(r, bi)| r.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() >= bi - 1e-9);
        if !feasible {
            continue;
        }
        let objective = p.objective(&x);
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(OracleSolution { x, objective });
        }
    }
    best
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Strictly convex QP with `n` variables and `m` rows, feasible by construction.
pub fn random_qp<R: Rng>(rng: &mut R, n: usize, m: usize) -> QuadProgram {
    let mut mat = vec![vec![0.0; n]; n];
    for row in mat.iter_mut() {
        for v in row.iter_mut() {
            *v = normal(rng);
        }
    }
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            q[i][j] = (0..n).map(|k| mat[k][i] * mat[k][j]).sum::<f64>();
        }
        q[i][i] += 0.1;
    }
    let linear: Vec<f64> = (0..n).map(|_| 3.0 * normal(rng)).collect();
    let (cons, rhs) = feasible_rows(rng, n, m);
    QuadProgram {
        quad: SparseMatrix::from_dense(&q, n),
        linear,
        cons,
        rhs,
        lower: None,
        upper: None,
    }
}

/// LP with box bounds `[-5, 5]` so an optimal vertex exists.
pub fn random_lp<R: Rng>(rng: &mut R, n: usize, m: usize) -> QuadProgram {
    let linear: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
    let (cons, rhs) = feasible_rows(rng, n, m);
    QuadProgram {
        quad: SparseMatrix::new(n, n),
        linear,
        cons,
        rhs,
        lower: Some(vec![-5.0; n]),
        upper: Some(vec![5.0; n]),
    }
}

fn feasible_rows<R: Rng>(rng: &mut R, n: usize, m: usize) -> (SparseMatrix, Vec<f64>) {
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for _ in 0..m {
        let a: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
        let ax: f64 = a.iter().zip(&x0).map(|(u, v)| u * v).sum();
        rhs.push(ax - rng.random_range(0.0..1.0));
        rows.push(a);
    }
    (SparseMatrix::from_dense(&rows, n), rhs)
}

/// Lagrangian dual value at the returned multipliers.
pub fn dual_value(p: &QuadProgram, duals: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let n = p.n_vars();
    let aty = p.cons.tmul_vec(duals);
    let mut c: Vec<f64> = (0..n).map(|j| p.linear[j] - aty[j] - lower[j] + upper[j]).collect();
    let mut value: f64 = p.rhs.iter().zip(duals).map(|(b, y)| b * y).sum();
    if let Some(lo) = &p.lower {
        value += lo
            .iter()
            .zip(lower)
            .filter(|(l, _)| l.is_finite())
            .map(|(l, y)| l * y)
            .sum::<f64>();
    }
    if let Some(hi) = &p.upper {
        value -= hi
            .iter()
            .zip(upper)
            .filter(|(u, _)| u.is_finite())
            .map(|(u, y)| u * y)
            .sum::<f64>();
    }
    let q = DMatrix::from_fn(n, n, |i, j| p.quad.to_dense()[i][j]);
    if q.iter().all(|v| *v == 0.0) {
        // LP: the inner minimum is 0 when c vanishes, -inf otherwise
        let c_inf = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        return if c_inf < 1e-7 { value } else { f64::NEG_INFINITY };
    }
    let cv = DVector::from_vec(std::mem::take(&mut c));
    let qinv_c = q.lu().solve(&cv).expect("oracle QPs are strictly convex");
    value - 0.5 * cv.dot(&qinv_c)
}
