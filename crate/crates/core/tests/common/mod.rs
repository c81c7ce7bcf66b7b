#![allow(dead_code)]

use std::path::PathBuf;

use mase::measurement::{generate_measurements, GenerationConfig, MeasurementSet};
use mase::network::synthetic::{random_network, SyntheticConfig};
use mase::network::{parse_case, BusBranchNetwork, CaseFormat};

pub fn case_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../cases")
        .join(name)
}

pub fn load_case(name: &str) -> BusBranchNetwork {
    let text = std::fs::read_to_string(case_path(name)).expect("fixture present");
    parse_case(&text, CaseFormat::MatpowerM).expect("fixture parses")
}

pub fn ieee14() -> BusBranchNetwork {
    load_case("case14.m")
}

pub fn ieee118() -> BusBranchNetwork {
    load_case("case118.m")
}

pub fn synthetic(n: usize, seed: u64) -> BusBranchNetwork {
    random_network(&SyntheticConfig::new(n, seed)).expect("synthetic network")
}

pub fn measurements(net: &BusBranchNetwork, seed: u64) -> MeasurementSet {
    generate_measurements(net, &GenerationConfig::default().with_seed(seed))
}

/// |a − b| ≤ tol·(1 + |b|)
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

use mase::measurement::{eval_h, eval_row_gradient, RowParams, StateVector};
use mase::partition::{AreaVariableMap, Quantity};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Truth with angles jittered by ±da and magnitudes by ±dv (slack angle kept).
pub fn perturbed_state(net: &BusBranchNetwork, seed: u64, da: f64, dv: f64) -> StateVector {
    let mut r = rng(seed);
    let mut x = StateVector::truth(net);
    for b in 0..net.n_bus() {
        if b != net.slack() {
            x.va[b] += r.random_range(-da..=da);
        }
        x.vm[b] += r.random_range(-dv..=dv);
    }
    x
}

fn nudged(state: &StateVector, bus: usize, q: Quantity, d: f64) -> StateVector {
    let mut s = state.clone();
    match q {
        Quantity::Angle => s.va[bus] += d,
        Quantity::Magnitude => s.vm[bus] += d,
    }
    s
}

/// Central finite differences of h over the row's buses (slack angle skipped).
pub fn fd_gradient(
    params: &RowParams,
    state: &StateVector,
    slack: usize,
    step: f64,
) -> Vec<((usize, Quantity), f64)> {
    let mut out = Vec::new();
    for &bus in &params.buses {
        for q in [Quantity::Angle, Quantity::Magnitude] {
            if q == Quantity::Angle && bus == slack {
                continue;
            }
            let hp = eval_h(params, &nudged(state, bus, q, step));
            let hm = eval_h(params, &nudged(state, bus, q, -step));
            out.push(((bus, q), (hp - hm) / (2.0 * step)));
        }
    }
    out
}

/// Local (va, vm) in `map.local_buses()` order.
pub fn local_state(map: &AreaVariableMap, x: &StateVector) -> (Vec<f64>, Vec<f64>) {
    map.local_buses().map(|b| (x.va[b], x.vm[b])).unzip()
}

/// Dense H (rows × combined slots), W and r for the given rows, built row by
/// row from the per-row gradient in global coordinates.
pub fn dense_jacobian(
    net: &BusBranchNetwork,
    ms: &MeasurementSet,
    map: &AreaVariableMap,
    rows: &[usize],
    x: &StateVector,
) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let n = map.n_total();
    let mut h = DMatrix::zeros(rows.len(), n);
    let mut w = DVector::zeros(rows.len());
    let mut r = DVector::zeros(rows.len());
    for (i, &row) in rows.iter().enumerate() {
        let p = ms.params(net, row);
        for ((bus, q), g) in eval_row_gradient(&p, x, net.slack()) {
            let s = map.slots(bus).expect("row bus visible to area");
            let col = match q {
                Quantity::Angle => s.angle.expect("non-slack angle"),
                Quantity::Magnitude => s.magnitude,
            };
            h[(i, col)] += g;
        }
        w[i] = ms.effective_weight(row);
        r[i] = ms.z[row] - eval_h(&p, x);
    }
    (h, w, r)
}

/// G = HᵀWH and b = HᵀWr, dense.
pub fn dense_normal_equations(
    h: &DMatrix<f64>,
    w: &DVector<f64>,
    r: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let wh = DMatrix::from_diagonal(w) * h;
    (h.transpose() * &wh, h.transpose() * w.component_mul(r))
}

pub fn to_na(m: &mase::linalg::DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.n_rows, m.n_cols, &m.data)
}

/// max |a − b| / (1 + max |b|)
pub fn rel_err_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = 1.0 + b.amax();
    (a - b).amax() / scale
}

pub fn rel_err_vec(a: &[f64], b: &[f64]) -> f64 {
    let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

use mase::assembly::{build_patterns, AssemblyPlan};
use mase::measurement::RowTemplates;
use mase::partition::{build_variable_maps, BoundaryOrdering, Partition};

pub struct AreaSetup {
    pub map: AreaVariableMap,
    pub rows: Vec<usize>,
    pub templates: RowTemplates,
    pub plan: AssemblyPlan,
}

pub fn area_setups(
    net: &BusBranchNetwork,
    ms: &MeasurementSet,
    part: &Partition,
) -> (BoundaryOrdering, Vec<AreaSetup>) {
    let (ordering, maps) = build_variable_maps(net, part);
    let owners = ms.owner_areas(net, part);
    let setups = maps
        .into_iter()
        .map(|map| {
            let rows: Vec<usize> = (0..ms.len()).filter(|&r| owners[r] == map.area).collect();
            let templates = RowTemplates::compile(net, &map, ms, rows.iter().copied());
            let plan = build_patterns(&map, &templates);
            AreaSetup {
                map,
                rows,
                templates,
                plan,
            }
        })
        .collect();
    (ordering, setups)
}

/// Deactivate roughly `fraction` of the rows at random.
pub fn random_mask(ms: &MeasurementSet, seed: u64, fraction: f64) -> MeasurementSet {
    let mut r = rng(seed);
    let mut out = ms.clone();
    for a in out.active.iter_mut() {
        if r.random_bool(fraction) {
            *a = false;
        }
    }
    out
}

use mase::linalg::{CsrMatrix, CsrPattern};
use std::collections::BTreeSet;

/// Random sparse SPD matrix G = AᵀA + shift·I, dense and as CSR over its
/// nonzero pattern (diagonal always present).
pub fn random_spd(n: usize, density: f64, seed: u64) -> (DMatrix<f64>, CsrMatrix) {
    let mut r = rng(seed);
    let m = n + 3;
    let mut a = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            if i == j || r.random_bool(density) {
                a[(i, j)] = r.random_range(-1.0..1.0);
            }
        }
    }
    let g = a.transpose() * &a + DMatrix::identity(n, n) * r.random_range(0.05..0.5);
    (g.clone(), csr_from_dense(&g))
}

pub fn csr_from_dense(g: &DMatrix<f64>) -> CsrMatrix {
    let sets: Vec<BTreeSet<usize>> = (0..g.nrows())
        .map(|i| {
            (0..g.ncols())
                .filter(|&j| g[(i, j)] != 0.0 || (i == j && g.nrows() == g.ncols()))
                .collect()
        })
        .collect();
    let pattern = CsrPattern::from_sets(g.ncols(), &sets);
    let mut m = CsrMatrix::zeros(pattern);
    for i in 0..g.nrows() {
        for p in m.pattern.row_ptr[i]..m.pattern.row_ptr[i + 1] {
            m.values[p] = g[(i, m.pattern.col_idx[p])];
        }
    }
    m
}

use mase::network::{Branch, Bus};

pub fn bus(id: i64, slack: bool, vm: f64, va: f64) -> Bus {
    Bus {
        id,
        base_kv: 100.0,
        gs: 0.0,
        bs: 0.0,
        is_slack: slack,
        vm_true: vm,
        va_true: va,
    }
}

pub fn line(from: usize, to: usize, r: f64, x: f64, b: f64) -> Branch {
    Branch {
        from_bus: from,
        to_bus: to,
        r,
        x,
        b_charging: b,
        tap: 1.0,
        shift: 0.0,
        in_service: true,
    }
}

/// n-bus path 0-1-..-(n-1) with the slack at `slack`.
pub fn path_network(n: usize, slack: usize) -> BusBranchNetwork {
    let buses = (0..n)
        .map(|i| {
            bus(
                i as i64 + 1,
                i == slack,
                1.0 - 0.01 * i as f64,
                -0.02 * i as f64,
            )
        })
        .collect();
    let branches = (1..n).map(|i| line(i - 1, i, 0.01, 0.1, 0.02)).collect();
    BusBranchNetwork::new(100.0, buses, branches).unwrap()
}

pub fn noiseless(net: &BusBranchNetwork) -> MeasurementSet {
    generate_measurements(net, &GenerationConfig::default().noiseless())
}
