use std::ops::Range;

use super::{QuadProgram, SparseMatrix};

/// Incremental assembly of a [`QuadProgram`] by named variable blocks.
///
/// Rows are always of the form `sum_j coef_j x_j >= rhs`.
#[derive(Debug, Clone, Default)]
pub struct ProgramBuilder {
    linear: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    quad: Vec<(usize, usize, f64)>,
    rows: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
    constant: f64,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.linear.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.linear.len() - 1
    }

    pub fn add_vars(&mut self, count: usize, cost: f64, lower: f64, upper: f64) -> Range<usize> {
        let start = self.n_vars();
        for _ in 0..count {
            self.add_var(cost, lower, upper);
        }
        start..self.n_vars()
    }

    pub fn free_vars(&mut self, count: usize) -> Range<usize> {
        self.add_vars(count, 0.0, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn nonneg_vars(&mut self, count: usize, cost: f64) -> Range<usize> {
        self.add_vars(count, cost, 0.0, f64::INFINITY)
    }

    pub fn add_cost(&mut self, var: usize, cost: f64) {
        self.linear[var] += cost;
    }

    pub fn add_constant(&mut self, value: f64) {
        self.constant += value;
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Adds `value * x_i * x_j` to the objective (both off-diagonal
    /// halves when `i != j`), i.e. `Q_ij = Q_ji += value` for `i != j`
    /// and `Q_ii += 2 value` on the diagonal.
    pub fn add_quad_term(&mut self, i: usize, j: usize, value: f64) {
        if i == j {
            self.quad.push((i, i, 2.0 * value));
        } else {
            self.quad.push((i, j, value));
            self.quad.push((j, i, value));
        }
    }

    /// Adds raw `Q` entries for the `1/2 x'Qx` term (caller keeps symmetry).
    pub fn add_q_entry(&mut self, i: usize, j: usize, value: f64) {
        self.quad.push((i, j, value));
    }

    pub fn add_row(&mut self, coefs: &[(usize, f64)], rhs: f64) -> usize {
        let r = self.rhs.len();
        for &(j, v) in coefs {
            if v != 0.0 {
                self.rows.push((r, j, v));
            }
        }
        self.rhs.push(rhs);
        r
    }

    pub fn build(self) -> QuadProgram {
        let n = self.linear.len();
        let mut quad = SparseMatrix::new(n, n);
        for (i, j, v) in self.quad {
            quad.push(i, j, v);
        }
        let mut cons = SparseMatrix::new(self.rhs.len(), n);
        for (i, j, v) in self.rows {
            cons.push(i, j, v);
        }
        let has_lower = self.lower.iter().any(|l| l.is_finite());
        let has_upper = self.upper.iter().any(|u| u.is_finite());
        QuadProgram {
            quad,
            linear: self.linear,
            cons,
            rhs: self.rhs,
            lower: has_lower.then_some(self.lower),
            upper: has_upper.then_some(self.upper),
        }
    }
}
