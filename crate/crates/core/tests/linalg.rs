mod common;

use common::*;
use mase::linalg::{
    interior_recover, minimum_degree, schur_condense, symbolic_analyze, Backend, CsrPattern,
    DenseMatrix, LocalFactor, Ordering,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn dense(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_rows(
        &(0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect::<Vec<_>>(),
    )
}

fn rhs(n: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

/// Condense then recover, returning (Δx_i, Δx_b).
fn condensed_solve(
    g: &DMatrix<f64>,
    b: &[f64],
    n_i: usize,
    backend: Backend,
) -> (Vec<f64>, Vec<f64>) {
    let g_ii = csr_from_dense(&g.view((0, 0), (n_i, n_i)).into_owned());
    let g_ib = csr_from_dense(&g.view((0, n_i), (n_i, g.nrows() - n_i)).into_owned());
    let g_bb = dense(
        &g.view((n_i, n_i), (g.nrows() - n_i, g.nrows() - n_i))
            .into_owned(),
    );
    let mut f = LocalFactor::analyze(&g_ii.pattern, backend);
    f.refactor(&g_ii).unwrap();
    let s = schur_condense(&f, &g_ib, &g_bb, &b[..n_i], &b[n_i..]);
    let sb = to_na(&s.s_b);
    let dxb: Vec<f64> = if sb.nrows() == 0 {
        vec![]
    } else {
        sb.cholesky()
            .unwrap()
            .solve(&DVector::from_column_slice(&s.b_hat))
            .as_slice()
            .to_vec()
    };
    let dxi = s.recover(&f, &dxb);
    let full = interior_recover(&f, &g_ib, &b[..n_i], &dxb);
    assert!(rel_err_vec(&dxi, &full) < 1e-10);
    (dxi, dxb)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn schur_matches_monolithic_solve(n_i in 1usize..40, n_b in 0usize..12, density in 0.02f64..0.3, seed in any::<u64>(), sparse in any::<bool>()) {
        let n = n_i + n_b;
        let (g, _) = random_spd(n, density, seed);
        let b = rhs(n, seed ^ 1);
        let backend = if sparse { Backend::Sparse } else { Backend::Dense };
        let (dxi, dxb) = condensed_solve(&g, &b, n_i, backend);
        let x = g.clone().cholesky().unwrap().solve(&DVector::from_column_slice(&b));
        let mut ours = dxi;
        ours.extend(dxb);
        prop_assert!(rel_err_vec(&ours, x.as_slice()) < 1e-9);
    }

    #[test]
    fn schur_complement_matches_dense_formula(n_i in 1usize..25, n_b in 1usize..8, seed in any::<u64>()) {
        let n = n_i + n_b;
        let (g, _) = random_spd(n, 0.2, seed);
        let gii = g.view((0, 0), (n_i, n_i)).into_owned();
        let gib = g.view((0, n_i), (n_i, n_b)).into_owned();
        let gbb = g.view((n_i, n_i), (n_b, n_b)).into_owned();
        let expect = &gbb - gib.transpose() * gii.clone().try_inverse().unwrap() * &gib;
        let g_ii = csr_from_dense(&gii);
        let mut f = LocalFactor::analyze(&g_ii.pattern, Backend::Sparse);
        f.refactor(&g_ii).unwrap();
        let s = schur_condense(&f, &csr_from_dense(&gib), &dense(&gbb), &vec![0.0; n_i], &vec![0.0; n_b]);
        prop_assert!(rel_err_mat(&to_na(&s.s_b), &expect) < 1e-9);
        prop_assert_eq!(s.s_b.max_asymmetry(), 0.0);
    }

    #[test]
    fn sparse_cholesky_solves(n in 1usize..80, density in 0.01f64..0.2, seed in any::<u64>(), natural in any::<bool>()) {
        let (g, csr) = random_spd(n, density, seed);
        let ordering = if natural { Ordering::Natural } else { Ordering::MinimumDegree };
        let mut cache = symbolic_analyze(&csr.pattern, ordering);
        cache.refactor(&csr.values).unwrap();
        let b = rhs(n, seed ^ 2);
        let x = cache.solve(&b);
        let oracle = g.cholesky().unwrap().solve(&DVector::from_column_slice(&b));
        prop_assert!(rel_err_vec(&x, oracle.as_slice()) < 1e-9);
    }

    /// Refactoring new values on an analyzed pattern equals a fresh analysis,
    /// and the factor structure does not move.
    #[test]
    fn symbolic_analysis_is_reusable(n in 2usize..60, seed in any::<u64>()) {
        let (_, first) = random_spd(n, 0.1, seed);
        let mut cache = symbolic_analyze(&first.pattern, Ordering::MinimumDegree);
        cache.refactor(&first.values).unwrap();
        let (l_ptr, l_idx) = { let (p, i) = cache.factor_structure(); (p.to_vec(), i.to_vec()) };

        let mut second = first.clone();
        let scale = rhs(n, seed ^ 3);
        for i in 0..n {
            for p in second.pattern.row_ptr[i]..second.pattern.row_ptr[i + 1] {
                let j = second.pattern.col_idx[p];
                second.values[p] *= 1.5 + 0.25 * (scale[i] + scale[j]);
            }
            let d = second.pattern.find(i, i).unwrap();
            second.values[d] += n as f64;
        }
        cache.refactor(&second.values).unwrap();
        let (p2, i2) = cache.factor_structure();
        prop_assert_eq!(p2, &l_ptr[..]);
        prop_assert_eq!(i2, &l_idx[..]);

        let mut fresh = symbolic_analyze(&second.pattern, Ordering::MinimumDegree);
        fresh.refactor(&second.values).unwrap();
        let b = rhs(n, seed ^ 4);
        prop_assert_eq!(cache.solve(&b), fresh.solve(&b));
    }

    #[test]
    fn minimum_degree_is_a_permutation(n in 1usize..60, seed in any::<u64>()) {
        let (_, csr) = random_spd(n, 0.1, seed);
        let mut perm = minimum_degree(&csr.pattern);
        perm.sort_unstable();
        prop_assert_eq!(perm, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn minimum_degree_avoids_arrow_fill() {
    let n = 30;
    let sets: Vec<std::collections::BTreeSet<usize>> = (0..n)
        .map(|i| {
            if i == 0 {
                (0..n).collect()
            } else {
                [0, i].into_iter().collect()
            }
        })
        .collect();
    let pattern = CsrPattern::from_sets(n, &sets);
    assert_eq!(
        symbolic_analyze(&pattern, Ordering::Natural).factor_nnz(),
        n * (n + 1) / 2
    );
    assert_eq!(
        symbolic_analyze(&pattern, Ordering::MinimumDegree).factor_nnz(),
        2 * n - 1
    );
}

#[test]
fn ieee118_gain_factor_is_sparse() {
    use mase::measurement::RowTemplates;
    use mase::partition::AreaVariableMap;
    let net = ieee118();
    let ms = measurements(&net, 0);
    let map = AreaVariableMap::centralized(&net);
    let t = RowTemplates::compile(&net, &map, &ms, 0..ms.len());
    let plan = mase::assembly::build_patterns(&map, &t);
    let md = symbolic_analyze(&plan.g_ii, Ordering::MinimumDegree);
    let nat = symbolic_analyze(&plan.g_ii, Ordering::Natural);
    assert_eq!(md.dim(), 235);
    assert!(md.factor_nnz() < nat.factor_nnz());
    assert!(md.factor_nnz() < 235 * 236 / 8);
}
