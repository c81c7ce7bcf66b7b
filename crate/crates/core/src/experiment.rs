//! Repeated-run harness and the partition-sweep and masking tables.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measurement::{apply_mask, MaskFamily, MeasurementSet, MeasurementType};
use crate::network::BusBranchNetwork;
use crate::partition::{partition_network, Partition};
use crate::solver::{solve_centralized, MultiAreaSolver, PhaseTimings, SolveOutput, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Centralized,
    Multiarea,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "centralized" | "central" => Ok(Method::Centralized),
            "multiarea" | "multi-area" | "mase" => Ok(Method::Multiarea),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Centralized => "centralized",
            Method::Multiarea => "multiarea",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub residual_norm: f64,
    pub timings: PhaseTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub n_bus: usize,
    pub n_branch: usize,
    pub n_measurements: usize,
    pub k: usize,
    pub boundary_dim: usize,
    pub repeats: usize,
    pub runs: Vec<RunRecord>,
    /// Phase means over runs 2..=repeats (the single run when repeats = 1).
    pub mean: PhaseTimings,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub residual_norm: f64,
}

/// Mean that drops the first (warm-up) sample when there is more than one.
pub fn mean_excluding_first(samples: &[f64]) -> f64 {
    match samples {
        [] => 0.0,
        [only] => *only,
        [_, rest @ ..] => rest.iter().sum::<f64>() / rest.len() as f64,
    }
}

fn mean_timings(runs: &[RunRecord]) -> PhaseTimings {
    let m = |f: fn(&PhaseTimings) -> f64| {
        mean_excluding_first(&runs.iter().map(|r| f(&r.timings)).collect::<Vec<_>>())
    };
    PhaseTimings {
        assembly: m(|t| t.assembly),
        local_condense: m(|t| t.local_condense),
        boundary_assemble: m(|t| t.boundary_assemble),
        boundary_solve: m(|t| t.boundary_solve),
        recovery: m(|t| t.recovery),
        total: m(|t| t.total),
    }
}

/// Solve `repeats` times on identical inputs and return the last output
/// together with the per-run table. Multi-area setup (templates, patterns,
/// symbolic analysis) is done once, outside the timed runs.
pub fn run_repeated(
    net: &BusBranchNetwork,
    ms: &MeasurementSet,
    method: Method,
    part: Option<&Partition>,
    config: &SolverConfig,
    repeats: usize,
) -> Result<(SolveOutput, RunSummary)> {
    let repeats = repeats.max(1);
    let single;
    let part = match (method, part) {
        (Method::Multiarea, Some(p)) => Some(p),
        (Method::Multiarea, None) => {
            single = partition_network(net, 1, 0)?;
            Some(&single)
        }
        (Method::Centralized, p) => p,
    };
    let mut multi = match method {
        Method::Multiarea => Some(MultiAreaSolver::new(
            net,
            ms,
            part.expect("multi-area has a partition"),
            config,
        )?),
        Method::Centralized => None,
    };

    let mut runs = Vec::with_capacity(repeats);
    let mut last = None;
    for run in 1..=repeats {
        let out = match multi.as_mut() {
            Some(solver) => solver.solve()?,
            None => solve_centralized(net, ms, config)?,
        };
        runs.push(RunRecord {
            run,
            iterations: out.report.iterations,
            converged: out.report.converged,
            objective: out.report.objective,
            residual_norm: out.report.weighted_residual_norm,
            timings: out.report.timings,
        });
        last = Some(out);
    }
    let out = last.expect("at least one run");
    let summary = RunSummary {
        method,
        n_bus: net.n_bus(),
        n_branch: net.n_branch(),
        n_measurements: ms.active_count(),
        k: part.map_or(1, |p| p.k),
        boundary_dim: out.report.boundary_dim,
        repeats,
        mean: mean_timings(&runs),
        iterations: out.report.iterations,
        converged: runs.iter().all(|r| r.converged),
        objective: out.report.objective,
        residual_norm: out.report.weighted_residual_norm,
        runs,
    };
    Ok((out, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub status: String,
    pub cut_branches: usize,
    pub boundary_buses: usize,
    pub boundary_dim: usize,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub total_seconds: f64,
    pub boundary_assemble_seconds: f64,
    pub boundary_solve_seconds: f64,
    /// (boundary assembly + boundary solve) / total, over mean timings.
    pub coordinator_share: f64,
}

impl SweepRow {
    fn failed(k: usize, status: String) -> Self {
        SweepRow {
            k,
            status,
            cut_branches: 0,
            boundary_buses: 0,
            boundary_dim: 0,
            iterations: 0,
            converged: false,
            objective: f64::NAN,
            total_seconds: 0.0,
            boundary_assemble_seconds: 0.0,
            boundary_solve_seconds: 0.0,
            coordinator_share: 0.0,
        }
    }
}

/// One multi-area run per k. Infeasible k and solver failures become
/// rows with a non-"ok" status.
pub fn sweep_k(
    net: &BusBranchNetwork,
    ms: &MeasurementSet,
    ks: &[usize],
    seed: u64,
    config: &SolverConfig,
    repeats: usize,
) -> Vec<SweepRow> {
    ks.iter()
        .map(|&k| {
            let part = match partition_network(net, k, seed) {
                Ok(p) => p,
                Err(e) => return SweepRow::failed(k, format!("infeasible: {e}")),
            };
            match run_repeated(net, ms, Method::Multiarea, Some(&part), config, repeats) {
                Ok((_, s)) => SweepRow {
                    k,
                    status: "ok".into(),
                    cut_branches: part.cut_branches.len(),
                    boundary_buses: part.boundary_buses.len(),
                    boundary_dim: s.boundary_dim,
                    iterations: s.iterations,
                    converged: s.converged,
                    objective: s.objective,
                    total_seconds: s.mean.total,
                    boundary_assemble_seconds: s.mean.boundary_assemble,
                    boundary_solve_seconds: s.mean.boundary_solve,
                    coordinator_share: s.mean.coordinator_share(),
                },
                Err(e) => SweepRow {
                    cut_branches: part.cut_branches.len(),
                    boundary_buses: part.boundary_buses.len(),
                    ..SweepRow::failed(k, format!("error: {e}"))
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRow {
    /// "None" or a measurement type name.
    pub family: String,
    pub status: String,
    pub removed_rows: usize,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub mean_seconds: f64,
}

/// The unmasked baseline plus one row per removed family.
pub fn mask_table(
    net: &BusBranchNetwork,
    ms: &MeasurementSet,
    families: &[MeasurementType],
    method: Method,
    part: Option<&Partition>,
    config: &SolverConfig,
    repeats: usize,
) -> Vec<MaskRow> {
    let baseline = std::iter::once(None).chain(families.iter().copied().map(Some));
    baseline
        .map(|family| {
            let masked = match family {
                Some(t) => apply_mask(ms, MaskFamily::Type(t)),
                None => ms.clone(),
            };
            let removed_rows = ms.active_count() - masked.active_count();
            let name = family.map_or_else(|| "None".to_string(), |t| t.to_string());
            match run_repeated(net, &masked, method, part, config, repeats) {
                Ok((_, s)) => MaskRow {
                    family: name,
                    status: "ok".into(),
                    removed_rows,
                    iterations: s.iterations,
                    converged: s.converged,
                    objective: s.objective,
                    mean_seconds: s.mean.total,
                },
                Err(e) => MaskRow {
                    family: name,
                    status: format!("error: {e}"),
                    removed_rows,
                    iterations: 0,
                    converged: false,
                    objective: f64::NAN,
                    mean_seconds: 0.0,
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub centralized: RunSummary,
    pub multiarea: RunSummary,
    /// ‖x̂_central − x̂_multi‖∞
    pub max_state_diff: f64,
    pub objective_rel_diff: f64,
}

pub fn compare(
    net: &BusBranchNetwork,
    ms: &MeasurementSet,
    part: &Partition,
    config: &SolverConfig,
    repeats: usize,
) -> Result<Comparison> {
    let (c_out, centralized) = run_repeated(net, ms, Method::Centralized, None, config, repeats)?;
    let (m_out, multiarea) = run_repeated(net, ms, Method::Multiarea, Some(part), config, repeats)?;
    let denom = centralized.objective.abs().max(f64::MIN_POSITIVE);
    Ok(Comparison {
        max_state_diff: c_out.state.max_abs_diff(&m_out.state),
        objective_rel_diff: (centralized.objective - multiarea.objective).abs() / denom,
        centralized,
        multiarea,
    })
}
