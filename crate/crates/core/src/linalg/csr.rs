use std::collections::BTreeSet;

/// Compressed sparse row structure with sorted column indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CsrPattern {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
}

impl CsrPattern {
    pub fn from_sets(n_cols: usize, rows: &[BTreeSet<usize>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in rows {
            col_idx.extend(row.iter().copied());
            row_ptr.push(col_idx.len());
        }
        CsrPattern {
            n_rows: rows.len(),
            n_cols,
            row_ptr,
            col_idx,
        }
    }

    pub fn diagonal(n: usize) -> Self {
        CsrPattern {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Position of (i, j) in the value array.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|p| start + p)
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        self.n_rows == self.n_cols
            && (0..self.n_rows).all(|i| self.row(i).iter().all(|&j| self.find(j, i).is_some()))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsrMatrix {
    pub pattern: CsrPattern,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: CsrPattern) -> Self {
        let values = vec![0.0; pattern.nnz()];
        CsrMatrix { pattern, values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn n_rows(&self) -> usize {
        self.pattern.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.pattern.n_cols
    }

    pub fn to_dense(&self) -> super::DenseMatrix {
        let mut d = super::DenseMatrix::zeros(self.n_rows(), self.n_cols());
        for i in 0..self.n_rows() {
            for p in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                d[(i, self.pattern.col_idx[p])] = self.values[p];
            }
        }
        d
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows())
            .map(|i| {
                (self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1])
                    .map(|p| self.values[p] * x[self.pattern.col_idx[p]])
                    .sum()
            })
            .collect()
    }
}
