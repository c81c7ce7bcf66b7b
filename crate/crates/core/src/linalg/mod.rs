//! Symmetric positive-definite solvers: dense Cholesky, sparse Cholesky with
//! cached symbolic analysis, and Schur-mode condensation with partial solves.

mod csr;
mod dense;
mod ordering;
mod schur;
mod sparse;

pub use csr::{CsrMatrix, CsrPattern};
pub use dense::{dense_cholesky_solve, DenseCholesky, DenseMatrix};
pub use ordering::{minimum_degree, Ordering};
pub use schur::{interior_recover, schur_condense, Backend, LocalFactor, SchurResult};
pub use sparse::{numeric_refactor, symbolic_analyze, SparseCholeskyCache};
