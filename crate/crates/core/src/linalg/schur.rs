//! Schur-mode condensation of a block SPD system
//!
//! ```text
//! [ G_ii  G_ib ] [Δx_i]   [b_i]
//! [ G_bi  G_bb ] [Δx_b] = [b_b]
//! ```
//!
//! With G_ii = Pᵀ L Lᵀ P, the forward-solved blocks Y = L⁻¹ P G_ib and
//! y_i = L⁻¹ P b_i give S_b = G_bb − YᵀY and b̂_b = b_b − Yᵀ y_i. Interior
//! recovery is the partial backward solve Δx_i = Pᵀ L⁻ᵀ (y_i − Y Δx_b).

use super::{CsrMatrix, CsrPattern, DenseCholesky, DenseMatrix, Ordering, SparseCholeskyCache};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Dense,
    Sparse,
    /// Dense below `AUTO_DENSE_LIMIT` interior variables, sparse above.
    #[default]
    Auto,
}

pub const AUTO_DENSE_LIMIT: usize = 64;

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dense" => Ok(Backend::Dense),
            "sparse" => Ok(Backend::Sparse),
            "auto" => Ok(Backend::Auto),
            other => Err(format!("unknown backend '{other}'")),
        }
    }
}

/// Persistent factorization of one G_ii.
#[derive(Debug, Clone)]
pub enum LocalFactor {
    Dense {
        pattern: CsrPattern,
        factor: Option<DenseCholesky>,
    },
    Sparse(Box<SparseCholeskyCache>),
}

impl LocalFactor {
    /// Analyze once for the given symmetric pattern.
    pub fn analyze(pattern: &CsrPattern, backend: Backend) -> Self {
        let dense = match backend {
            Backend::Dense => true,
            Backend::Sparse => false,
            Backend::Auto => pattern.n_rows < AUTO_DENSE_LIMIT,
        };
        if dense {
            LocalFactor::Dense {
                pattern: pattern.clone(),
                factor: None,
            }
        } else {
            LocalFactor::Sparse(Box::new(super::symbolic_analyze(
                pattern,
                Ordering::MinimumDegree,
            )))
        }
    }

    /// Value-only refactorization of G_ii.
    pub fn refactor(&mut self, g_ii: &CsrMatrix) -> Result<()> {
        match self {
            LocalFactor::Dense { factor, .. } => {
                *factor = None;
                *factor = Some(DenseCholesky::factor(&g_ii.to_dense())?);
                Ok(())
            }
            LocalFactor::Sparse(cache) => cache.refactor(&g_ii.values),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LocalFactor::Dense { pattern, .. } => pattern.n_rows,
            LocalFactor::Sparse(c) => c.dim(),
        }
    }

    /// b ← L⁻¹ P b
    pub fn forward(&self, b: &mut [f64]) {
        match self {
            LocalFactor::Dense { factor, .. } => {
                factor.as_ref().expect("factor before solving").forward(b)
            }
            LocalFactor::Sparse(c) => c.forward(b),
        }
    }

    /// y ← Pᵀ L⁻ᵀ y
    pub fn backward(&self, y: &mut [f64]) {
        match self {
            LocalFactor::Dense { factor, .. } => {
                factor.as_ref().expect("factor before solving").backward(y)
            }
            LocalFactor::Sparse(c) => c.backward(y),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    pub fn factor_nnz(&self) -> usize {
        match self {
            LocalFactor::Dense { pattern, .. } => pattern.n_rows * (pattern.n_rows + 1) / 2,
            LocalFactor::Sparse(c) => c.factor_nnz(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchurResult {
    /// S_b = G_bb − G_bi G_ii⁻¹ G_ib
    pub s_b: DenseMatrix,
    /// b̂_b = b_b − G_bi G_ii⁻¹ b_i
    pub b_hat: Vec<f64>,
    /// Forward-solved G_ib columns, column-major (n_boundary × n_interior).
    y_ib: Vec<f64>,
    /// Forward-solved b_i.
    y_i: Vec<f64>,
}

/// Condense the block system onto its boundary variables using a factored
/// G_ii. `g_ib` is n_interior × n_boundary.
pub fn schur_condense(
    factor: &LocalFactor,
    g_ib: &CsrMatrix,
    g_bb: &DenseMatrix,
    b_i: &[f64],
    b_b: &[f64],
) -> SchurResult {
    let n_i = factor.dim();
    let n_b = g_bb.n_rows;
    debug_assert_eq!(g_ib.n_rows(), n_i);
    debug_assert_eq!(g_ib.n_cols(), n_b);

    // Scatter G_ib into columns, then forward-solve each column.
    let mut y_ib = vec![0.0; n_i * n_b];
    for i in 0..n_i {
        for p in g_ib.pattern.row_ptr[i]..g_ib.pattern.row_ptr[i + 1] {
            y_ib[g_ib.pattern.col_idx[p] * n_i + i] = g_ib.values[p];
        }
    }
    for col in y_ib.chunks_mut(n_i.max(1)).take(n_b) {
        factor.forward(col);
    }
    let mut y_i = b_i.to_vec();
    factor.forward(&mut y_i);

    let column = |c: usize| &y_ib[c * n_i..(c + 1) * n_i];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut s_b = g_bb.clone();
    for a in 0..n_b {
        for b in 0..=a {
            let v = g_bb[(a, b)] - dot(column(a), column(b));
            s_b[(a, b)] = v;
            s_b[(b, a)] = v;
        }
    }
    let b_hat = (0..n_b).map(|a| b_b[a] - dot(column(a), &y_i)).collect();
    SchurResult {
        s_b,
        b_hat,
        y_ib,
        y_i,
    }
}

impl SchurResult {
    /// Partial backward solve: Δx_i = Pᵀ L⁻ᵀ (y_i − Y Δx_b).
    pub fn recover(&self, factor: &LocalFactor, delta_xb: &[f64]) -> Vec<f64> {
        let n_i = self.y_i.len();
        let mut rhs = self.y_i.clone();
        for (c, &dx) in delta_xb.iter().enumerate() {
            if dx != 0.0 {
                for (r, y) in rhs.iter_mut().zip(&self.y_ib[c * n_i..(c + 1) * n_i]) {
                    *r -= y * dx;
                }
            }
        }
        factor.backward(&mut rhs);
        rhs
    }
}

/// Δx_i = G_ii⁻¹ (b_i − G_ib Δx_b) by a full solve against the factor.
pub fn interior_recover(
    factor: &LocalFactor,
    g_ib: &CsrMatrix,
    b_i: &[f64],
    delta_xb: &[f64],
) -> Vec<f64> {
    let coupling = g_ib.mul_vec(delta_xb);
    let rhs: Vec<f64> = b_i.iter().zip(&coupling).map(|(b, c)| b - c).collect();
    factor.solve(&rhs)
}
