use std::time::Instant;

use super::{PhaseTimings, SolveOutput, SolveReport, SolverConfig};
use crate::assembly::{build_patterns, explicit_assemble};
use crate::error::{Error, Result};
use crate::linalg::LocalFactor;
use crate::measurement::{objective, MeasurementSet, RowTemplates, StateVector};
use crate::network::BusBranchNetwork;
use crate::partition::AreaVariableMap;

/// Full WLS Gauss-Newton from a flat start: G Δx = HᵀW r with H materialized.
pub fn solve_centralized(
    net: &BusBranchNetwork,
    ms: &MeasurementSet,
    config: &SolverConfig,
) -> Result<SolveOutput> {
    config.validate()?;
    let start = Instant::now();
    let mut timings = PhaseTimings::default();

    let map = AreaVariableMap::centralized(net);
    let templates = RowTemplates::compile(net, &map, ms, 0..ms.len());
    let plan = build_patterns(&map, &templates);
    let mut factor = LocalFactor::analyze(&plan.g_ii, config.backend);
    let slots: Vec<_> = (0..net.n_bus())
        .map(|b| map.slots(b).expect("every bus is interior"))
        .collect();

    let mut x = StateVector::flat(net);
    let mut iterates = Vec::new();
    if config.record_iterates {
        iterates.push(x.clone());
    }
    let mut history = vec![objective(net, ms, &x)];
    let mut step_norms = Vec::new();
    let mut converged = false;

    for _ in 0..config.max_outer_iterations {
        let t = Instant::now();
        let (_, blocks) = explicit_assemble(&plan, &templates, ms, &x.va, &x.vm);
        PhaseTimings::add(&mut timings.assembly, t.elapsed());

        let t = Instant::now();
        factor.refactor(&blocks.g_ii).map_err(|e| match e {
            Error::NotPositiveDefinite { pivot } => Error::Unobservable { pivot },
            other => other,
        })?;
        let dx = factor.solve(&blocks.b_i);
        PhaseTimings::add(&mut timings.local_condense, t.elapsed());

        let prev = x.clone();
        for (bus, s) in slots.iter().enumerate() {
            if let Some(a) = s.angle {
                x.va[bus] += dx[a];
            }
            x.vm[bus] += dx[s.magnitude];
        }
        let step = x.max_abs_diff(&prev);
        step_norms.push(step);
        history.push(objective(net, ms, &x));
        if config.record_iterates {
            iterates.push(x.clone());
        }
        if step < config.convergence_tol {
            converged = true;
            break;
        }
    }

    timings.total = start.elapsed().as_secs_f64();
    let j = *history.last().expect("history starts with the flat point");
    let report = SolveReport {
        method: "centralized".into(),
        iterations: step_norms.len(),
        objective: j,
        weighted_residual_norm: j.sqrt(),
        converged,
        final_step_norm: *step_norms.last().unwrap_or(&f64::INFINITY),
        boundary_dim: 0,
        objective_history: history,
        step_norms,
        timings,
    };
    Ok(SolveOutput {
        state: x,
        report,
        iterates,
    })
}
