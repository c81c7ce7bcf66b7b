//! Up-looking sparse Cholesky with a one-time symbolic analysis.
//!
//! `symbolic_analyze` fixes the ordering, elimination tree and the full
//! structure of L. `numeric_refactor` then only rewrites factor values, so
//! the same cache serves every Gauss-Newton iteration.

use super::ordering::{minimum_degree, Ordering};
use super::CsrPattern;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct SparseCholeskyCache {
    n: usize,
    /// perm[k] = original index eliminated at step k.
    perm: Vec<usize>,
    iperm: Vec<usize>,
    parent: Vec<usize>,
    /// Upper triangle of PAPᵀ by column: rows ≤ column, with the position of
    /// each entry in the caller's value array.
    a_ptr: Vec<usize>,
    a_row: Vec<usize>,
    a_src: Vec<usize>,
    /// Row patterns of L (strictly lower part), ascending.
    r_ptr: Vec<usize>,
    r_idx: Vec<usize>,
    /// L by column, diagonal first.
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    pattern_nnz: usize,
    factored: bool,
    work: Vec<f64>,
    next: Vec<usize>,
}

/// Analyze a structurally symmetric CSR pattern (both triangles present).
pub fn symbolic_analyze(pattern: &CsrPattern, ordering: Ordering) -> SparseCholeskyCache {
    debug_assert!(pattern.is_structurally_symmetric());
    let n = pattern.n_rows;
    let perm = match ordering {
        Ordering::Natural => (0..n).collect(),
        Ordering::MinimumDegree => minimum_degree(pattern),
    };
    let mut iperm = vec![0; n];
    for (k, &v) in perm.iter().enumerate() {
        iperm[v] = k;
    }

    // Permuted upper triangle by column.
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for &j in pattern.row(i) {
            if iperm[i] <= iperm[j] {
                counts[iperm[j]] += 1;
            }
        }
    }
    let mut a_ptr = vec![0; n + 1];
    for k in 0..n {
        a_ptr[k + 1] = a_ptr[k] + counts[k];
    }
    let mut fill = a_ptr.clone();
    let mut a_row = vec![0; a_ptr[n]];
    let mut a_src = vec![0; a_ptr[n]];
    for i in 0..n {
        for p in pattern.row_ptr[i]..pattern.row_ptr[i + 1] {
            let j = pattern.col_idx[p];
            let (pi, pj) = (iperm[i], iperm[j]);
            if pi <= pj {
                a_row[fill[pj]] = pi;
                a_src[fill[pj]] = p;
                fill[pj] += 1;
            }
        }
    }

    let parent = etree(n, &a_ptr, &a_row);

    // Row patterns by elimination-tree reach.
    let mut mark = vec![NONE; n];
    let mut r_ptr = vec![0; n + 1];
    let mut r_idx = Vec::new();
    let mut col_count = vec![1usize; n];
    let mut row_buf = Vec::new();
    for k in 0..n {
        mark[k] = k;
        row_buf.clear();
        for &i0 in &a_row[a_ptr[k]..a_ptr[k + 1]] {
            let mut i = i0;
            while i != NONE && mark[i] != k {
                mark[i] = k;
                row_buf.push(i);
                i = parent[i];
            }
        }
        row_buf.sort_unstable();
        for &i in &row_buf {
            col_count[i] += 1;
        }
        r_idx.extend_from_slice(&row_buf);
        r_ptr[k + 1] = r_idx.len();
    }

    let mut l_ptr = vec![0; n + 1];
    for j in 0..n {
        l_ptr[j + 1] = l_ptr[j] + col_count[j];
    }
    let mut l_idx = vec![0; l_ptr[n]];
    let mut next: Vec<usize> = (0..n).map(|j| l_ptr[j] + 1).collect();
    for j in 0..n {
        l_idx[l_ptr[j]] = j;
    }
    for k in 0..n {
        for &i in &r_idx[r_ptr[k]..r_ptr[k + 1]] {
            l_idx[next[i]] = k;
            next[i] += 1;
        }
    }

    let nnz = l_ptr[n];
    SparseCholeskyCache {
        n,
        perm,
        iperm,
        parent,
        a_ptr,
        a_row,
        a_src,
        r_ptr,
        r_idx,
        l_ptr,
        l_idx,
        l_val: vec![0.0; nnz],
        pattern_nnz: pattern.nnz(),
        factored: false,
        work: vec![0.0; n],
        next,
    }
}

fn etree(n: usize, a_ptr: &[usize], a_row: &[usize]) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &i0 in &a_row[a_ptr[k]..a_ptr[k + 1]] {
            let mut i = i0;
            while i != NONE && i < k {
                let up = ancestor[i];
                ancestor[i] = k;
                if up == NONE {
                    parent[i] = k;
                    break;
                }
                i = up;
            }
        }
    }
    parent
}

/// Refresh factor values for `values` laid out like the analyzed pattern.
pub fn numeric_refactor(cache: &mut SparseCholeskyCache, values: &[f64]) -> Result<()> {
    cache.refactor(values)
}

impl SparseCholeskyCache {
    pub fn refactor(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.pattern_nnz {
            return Err(Error::Dimension(format!(
                "{} values for a pattern with {} entries",
                values.len(),
                self.pattern_nnz
            )));
        }
        self.factored = false;
        let n = self.n;
        let x = &mut self.work;
        for j in 0..n {
            self.next[j] = self.l_ptr[j] + 1;
        }
        for k in 0..n {
            for e in self.a_ptr[k]..self.a_ptr[k + 1] {
                x[self.a_row[e]] += values[self.a_src[e]];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &self.r_idx[self.r_ptr[k]..self.r_ptr[k + 1]] {
                let lki = x[i] / self.l_val[self.l_ptr[i]];
                x[i] = 0.0;
                for p in self.l_ptr[i] + 1..self.next[i] {
                    x[self.l_idx[p]] -= self.l_val[p] * lki;
                }
                d -= lki * lki;
                debug_assert_eq!(self.l_idx[self.next[i]], k);
                self.l_val[self.next[i]] = lki;
                self.next[i] += 1;
            }
            if !(d > 0.0) {
                x.iter_mut().for_each(|v| *v = 0.0);
                return Err(Error::NotPositiveDefinite {
                    pivot: self.perm[k],
                });
            }
            self.l_val[self.l_ptr[k]] = d.sqrt();
        }
        self.factored = true;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_factored(&self) -> bool {
        self.factored
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn etree_parent(&self) -> &[usize] {
        &self.parent
    }

    /// Column pointers and row indices of L (in elimination order).
    pub fn factor_structure(&self) -> (&[usize], &[usize]) {
        (&self.l_ptr, &self.l_idx)
    }

    pub fn factor_nnz(&self) -> usize {
        self.l_ptr[self.n]
    }

    /// Entries of L beyond the lower triangle of the permuted input.
    pub fn fill_in(&self) -> usize {
        self.factor_nnz() - self.a_ptr[self.n]
    }

    /// Floating-point operations for one numeric factorization.
    pub fn flops(&self) -> usize {
        (0..self.n)
            .map(|j| {
                let c = self.l_ptr[j + 1] - self.l_ptr[j];
                c * c
            })
            .sum()
    }

    /// In place: b ← L⁻¹ P b. Result is in elimination order.
    pub fn forward(&self, b: &mut [f64]) {
        let y = self.permute(b);
        b.copy_from_slice(&y);
        for j in 0..self.n {
            let yj = b[j] / self.l_val[self.l_ptr[j]];
            b[j] = yj;
            for p in self.l_ptr[j] + 1..self.l_ptr[j + 1] {
                b[self.l_idx[p]] -= self.l_val[p] * yj;
            }
        }
    }

    /// In place: y ← Pᵀ L⁻ᵀ y. Input in elimination order.
    pub fn backward(&self, y: &mut [f64]) {
        for j in (0..self.n).rev() {
            let mut s = y[j];
            for p in self.l_ptr[j] + 1..self.l_ptr[j + 1] {
                s -= self.l_val[p] * y[self.l_idx[p]];
            }
            y[j] = s / self.l_val[self.l_ptr[j]];
        }
        let mut out = vec![0.0; self.n];
        for (k, &v) in self.perm.iter().enumerate() {
            out[v] = y[k];
        }
        y.copy_from_slice(&out);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    fn permute(&self, b: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&v| b[v]).collect()
    }

    #[allow(dead_code)]
    pub(crate) fn inverse_permutation(&self) -> &[usize] {
        &self.iperm
    }
}
