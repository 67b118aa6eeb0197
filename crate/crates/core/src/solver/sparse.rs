/// Coordinate-format sparse matrix. Duplicate entries are summed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn identity(n: usize, scale: f64) -> Self {
        let mut m = Self::new(n, n);
        for i in 0..n {
            m.push(i, i, scale);
        }
        m
    }

    /// Builds from dense rows; exact zeros are skipped.
    pub fn from_dense(rows: &[Vec<f64>], ncols: usize) -> Self {
        let mut m = Self::new(rows.len(), ncols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged dense matrix");
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    m.push(i, j, v);
                }
            }
        }
        m
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        assert!(
            row < self.nrows && col < self.ncols,
            "entry ({row},{col}) out of bounds"
        );
        self.entries.push((row, col, value));
    }

    /// Appends an empty row and returns its index.
    pub fn add_row(&mut self) -> usize {
        self.nrows += 1;
        self.nrows - 1
    }

    pub fn grow_cols(&mut self, ncols: usize) {
        assert!(ncols >= self.ncols);
        self.ncols = ncols;
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    pub fn tmul_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.nrows);
        let mut x = vec![0.0; self.ncols];
        for &(i, j, v) in &self.entries {
            x[j] += v * y[i];
        }
        x
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for &(i, j, v) in &self.entries {
            d[i][j] += v;
        }
        d
    }

    pub fn transpose(&self) -> Self {
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            entries: self.entries.iter().map(|&(i, j, v)| (j, i, v)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.2.abs()))
    }

    /// Dense rows with duplicates summed, keyed by row then column.
    pub(crate) fn row_lists(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![Vec::new(); self.nrows];
        for &(i, j, v) in &self.entries {
            rows[i].push((j, v));
        }
        for r in &mut rows {
            r.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(r.len());
            for &(j, v) in r.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            *r = merged;
        }
        rows
    }
}
