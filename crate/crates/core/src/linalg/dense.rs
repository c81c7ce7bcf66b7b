use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DenseMatrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        DenseMatrix {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}

/// Lower Cholesky factor L of A = L Lᵀ, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    /// Factor the lower triangle of `a`. Fails at the first non-positive pivot.
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if a.n_rows != a.n_cols {
            return Err(Error::Dimension(format!(
                "{}x{} matrix is not square",
                a.n_rows, a.n_cols
            )));
        }
        let n = a.n_rows;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(DenseCholesky { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// In place: b ← L⁻¹ b.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s = row.iter().zip(&b[..i]).fold(b[i], |s, (l, x)| s - l * x);
            b[i] = s / self.l[i * n + i];
        }
    }

    /// In place: y ← L⁻ᵀ y.
    pub fn backward(&self, y: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let s = (i + 1..n).fold(y[i], |s, k| s - self.l[k * n + i] * y[k]);
            y[i] = s / self.l[i * n + i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }
}

pub fn dense_cholesky_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n_rows {
        return Err(Error::Dimension(format!(
            "rhs length {} for {}x{} matrix",
            b.len(),
            a.n_rows,
            a.n_cols
        )));
    }
    Ok(DenseCholesky::factor(a)?.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve() {
        let b = vec![1.0, -2.0, 3.5];
        assert_eq!(
            dense_cholesky_solve(&DenseMatrix::identity(3), &b).unwrap(),
            b
        );
    }

    #[test]
    fn two_by_two() {
        let a = DenseMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let x = dense_cholesky_solve(&a, &[2.0, 1.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && x[1].abs() < 1e-15, "{x:?}");
    }

    #[test]
    fn indefinite_fails_at_second_pivot() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            dense_cholesky_solve(&a, &[1.0, 1.0]),
            Err(Error::NotPositiveDefinite { pivot: 1 })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            dense_cholesky_solve(&DenseMatrix::identity(2), &[1.0]),
            Err(Error::Dimension(_))
        ));
    }
}
