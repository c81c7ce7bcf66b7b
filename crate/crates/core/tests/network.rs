mod common;

use common::*;
use mase::assembly::build_patterns;
use mase::measurement::{generate_measurements, GenerationConfig, RowTemplates};
use mase::network::{parse_case, to_native_json, CaseFormat};
use mase::partition::{partition_network, AreaVariableMap};
use num_complex::Complex64;

/// Ybus = Cfᵀ Yf + Ctᵀ Yt + diag(Ysh), written out densely per branch.
fn ybus_oracle(net: &mase::network::BusBranchNetwork) -> Vec<Vec<Complex64>> {
    let n = net.n_bus();
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for (i, b) in net.buses.iter().enumerate() {
        y[i][i] += Complex64::new(b.gs, b.bs);
    }
    for br in &net.branches {
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let t = Complex64::from_polar(br.tap, br.shift);
        let half = Complex64::new(0.0, br.b_charging / 2.0);
        let (f, to) = (br.from_bus, br.to_bus);
        y[f][f] += (ys + half) / (t * t.conj());
        y[f][to] += -ys / t.conj();
        y[to][f] += -ys / t;
        y[to][to] += ys + half;
    }
    y
}

fn assert_ybus(net: &mase::network::BusBranchNetwork) {
    let oracle = ybus_oracle(net);
    let ours = net.ybus.to_dense();
    for i in 0..net.n_bus() {
        for j in 0..net.n_bus() {
            assert!(
                (ours[i][j] - oracle[i][j]).norm() < 1e-9 * (1.0 + oracle[i][j].norm()),
                "({i},{j})"
            );
        }
    }
}

#[test]
fn ieee14_golden() {
    let net = ieee14();
    assert_eq!((net.n_bus(), net.n_branch()), (14, 20));
    assert_eq!(net.buses[net.slack()].id, 1);
    assert_ybus(&net);
    let ms = generate_measurements(&net, &GenerationConfig::default());
    assert_eq!(ms.len(), 3 * 14 + 4 * 20);
    let map = AreaVariableMap::centralized(&net);
    let plan = build_patterns(&map, &RowTemplates::compile(&net, &map, &ms, 0..ms.len()));
    assert_eq!((plan.g_ii.n_rows, plan.g_ii.n_cols), (27, 27));
    let part = partition_network(&net, 3, 0).unwrap();
    assert!(
        (2..=10).contains(&part.boundary_buses.len()),
        "{}",
        part.boundary_buses.len()
    );
}

#[test]
fn ieee118_golden() {
    let net = ieee118();
    assert_eq!((net.n_bus(), net.n_branch()), (118, 186));
    assert_eq!(net.buses[net.slack()].id, 69);
    assert!((net.buses[net.slack()].va_true - 30f64.to_radians()).abs() < 1e-12);
    assert!(net.branches.iter().any(|b| b.tap != 1.0));
    assert_ybus(&net);
}

#[test]
fn synthetic_ybus_matches_oracle() {
    for seed in 0..5 {
        let net = synthetic(60, seed);
        assert_ybus(&net);
        assert!(net.branches.iter().any(|b| b.tap != 1.0));
    }
}

#[test]
fn native_json_round_trip() {
    for net in [ieee14(), ieee118(), synthetic(40, 1)] {
        let text = to_native_json(&net);
        let back = parse_case(&text, CaseFormat::NativeJson).unwrap();
        assert_eq!(back, net);
    }
}

#[test]
fn format_detection() {
    assert_eq!(
        CaseFormat::from_path(&case_path("case14.m")),
        CaseFormat::MatpowerM
    );
    assert_eq!(
        CaseFormat::from_path(std::path::Path::new("grid.json")),
        CaseFormat::NativeJson
    );
}
