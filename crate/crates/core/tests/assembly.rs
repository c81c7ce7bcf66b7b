mod common;

use common::*;
use mase::assembly::{explicit_assemble, fused_accumulate, AccumulationMode, AreaNormalBlocks};
use mase::measurement::{MeasurementSet, RowTemplates, StateVector};
use mase::network::BusBranchNetwork;
use mase::partition::{partition_network, AreaVariableMap, Quantity};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn draw(seed: u64) -> (BusBranchNetwork, MeasurementSet, usize, StateVector) {
    let net = if seed.is_multiple_of(4) {
        ieee14()
    } else {
        synthetic(20 + (seed as usize * 7) % 80, seed)
    };
    let ms = random_mask(&measurements(&net, seed), seed + 11, 0.2);
    let k = 1 + (seed as usize) % 5;
    let x = perturbed_state(&net, seed + 3, 0.2, 0.05);
    (net, ms, k, x)
}

fn block_errors(a: &AreaNormalBlocks, b: &AreaNormalBlocks) -> [f64; 5] {
    [
        rel_err_mat(&to_na(&a.g_ii.to_dense()), &to_na(&b.g_ii.to_dense())),
        rel_err_mat(&to_na(&a.g_ib.to_dense()), &to_na(&b.g_ib.to_dense())),
        rel_err_mat(&to_na(&a.g_bb), &to_na(&b.g_bb)),
        rel_err_vec(&a.b_i, &b.b_i),
        rel_err_vec(&a.b_b, &b.b_b),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn fused_matches_explicit_and_dense_oracle(seed in 0u64..10_000) {
        let (net, ms, k, x) = draw(seed);
        let part = partition_network(&net, k, seed).unwrap();
        let (_, areas) = area_setups(&net, &ms, &part);
        for a in &areas {
            let (va, vm) = local_state(&a.map, &x);
            let fused = fused_accumulate(&a.plan, &a.templates, &ms, &va, &vm, AccumulationMode::Deterministic);
            let (_, explicit) = explicit_assemble(&a.plan, &a.templates, &ms, &va, &vm);
            for e in block_errors(&fused, &explicit) {
                prop_assert!(e < 5e-13, "fused vs explicit {e:e}");
            }
            let (h, w, r) = dense_jacobian(&net, &ms, &a.map, &a.rows, &x);
            let (g, b) = dense_normal_equations(&h, &w, &r);
            let (fg, fb) = fused.to_dense_system();
            prop_assert!(rel_err_mat(&to_na(&fg), &g) < 1e-12);
            prop_assert!(rel_err_vec(&fb, b.as_slice()) < 1e-12);
        }
    }

    #[test]
    fn parallel_accumulation_agrees(seed in 0u64..10_000) {
        let (net, ms, _, x) = draw(seed);
        let map = AreaVariableMap::centralized(&net);
        let t = RowTemplates::compile(&net, &map, &ms, 0..ms.len());
        let plan = mase::assembly::build_patterns(&map, &t);
        let (va, vm) = local_state(&map, &x);
        let det = fused_accumulate(&plan, &t, &ms, &va, &vm, AccumulationMode::Deterministic);
        let par = fused_accumulate(&plan, &t, &ms, &va, &vm, AccumulationMode::Parallel);
        for e in block_errors(&par, &det) {
            prop_assert!(e < 1e-13);
        }
        let again = fused_accumulate(&plan, &t, &ms, &va, &vm, AccumulationMode::Deterministic);
        prop_assert_eq!(det, again);
    }

    #[test]
    fn blocks_are_exactly_symmetric(seed in 0u64..10_000) {
        let (net, ms, k, x) = draw(seed);
        let part = partition_network(&net, k, seed).unwrap();
        let (_, areas) = area_setups(&net, &ms, &part);
        for a in &areas {
            let (va, vm) = local_state(&a.map, &x);
            for mode in [AccumulationMode::Deterministic, AccumulationMode::Parallel] {
                let blocks = fused_accumulate(&a.plan, &a.templates, &ms, &va, &vm, mode);
                prop_assert!(a.plan.g_ii.is_structurally_symmetric());
                prop_assert_eq!(blocks.g_ii.to_dense().max_asymmetry(), 0.0);
                prop_assert_eq!(blocks.g_bb.max_asymmetry(), 0.0);
            }
        }
    }

    #[test]
    fn masked_rows_contribute_nothing(seed in 0u64..10_000) {
        let (net, ms, _, x) = draw(seed);
        let map = AreaVariableMap::centralized(&net);
        let all = RowTemplates::compile(&net, &map, &ms, 0..ms.len());
        let plan = mase::assembly::build_patterns(&map, &all);
        let active: Vec<usize> = (0..ms.len()).filter(|&r| ms.active[r]).collect();
        let subset = RowTemplates::compile(&net, &map, &ms, active.iter().copied());
        let (va, vm) = local_state(&map, &x);
        let masked = fused_accumulate(&plan, &all, &ms, &va, &vm, AccumulationMode::Deterministic);
        let subset_plan = mase::assembly::build_patterns(&map, &subset);
        let dropped = fused_accumulate(&subset_plan, &subset, &ms, &va, &vm, AccumulationMode::Deterministic);
        let (mg, mb) = masked.to_dense_system();
        let (dg, db) = dropped.to_dense_system();
        prop_assert_eq!(mg, dg);
        prop_assert_eq!(mb, db);
    }

    /// Embedding every area's full local system into global coordinates and
    /// summing gives the centralized normal equations.
    #[test]
    fn area_systems_add_up_to_centralized(seed in 0u64..10_000) {
        let (net, ms, k, x) = draw(seed);
        let part = partition_network(&net, k, seed).unwrap();
        let (_, areas) = area_setups(&net, &ms, &part);
        let central = AreaVariableMap::centralized(&net);
        let global_col = |bus: usize, q: Quantity| {
            let s = central.slots(bus).unwrap();
            if q == Quantity::Angle { s.angle.unwrap() } else { s.magnitude }
        };
        let n = central.n_total();
        let mut g_sum = DMatrix::zeros(n, n);
        let mut b_sum = vec![0.0; n];
        for a in &areas {
            let (va, vm) = local_state(&a.map, &x);
            let blocks = fused_accumulate(&a.plan, &a.templates, &ms, &va, &vm, AccumulationMode::Deterministic);
            let (g, b) = blocks.to_dense_system();
            let mut to_global = vec![0; a.map.n_total()];
            for bus in a.map.local_buses() {
                let s = a.map.slots(bus).unwrap();
                if let Some(i) = s.angle { to_global[i] = global_col(bus, Quantity::Angle); }
                to_global[s.magnitude] = global_col(bus, Quantity::Magnitude);
            }
            for i in 0..to_global.len() {
                b_sum[to_global[i]] += b[i];
                for j in 0..to_global.len() {
                    g_sum[(to_global[i], to_global[j])] += g[(i, j)];
                }
            }
        }
        let (h, w, r) = dense_jacobian(&net, &ms, &central, &(0..ms.len()).collect::<Vec<_>>(), &x);
        let (g, b) = dense_normal_equations(&h, &w, &r);
        prop_assert!(rel_err_mat(&g_sum, &g) < 1e-12);
        prop_assert!(rel_err_vec(&b_sum, b.as_slice()) < 1e-12);
    }
}
