//! Hierarchical boundary-condensed estimation.
//!
//! Per outer iteration: broadcast x_Γ; every area assembles its blocks with
//! the fused path and condenses onto its local boundary; the coordinator
//! sums the scattered (S_b, b̂_b) into (S_Γ, b̂_Γ) and solves it by dense
//! Cholesky; every area gathers its Δx_b and recovers Δx_i. Area phases
//! run concurrently between coordinator barriers.

use std::time::Instant;

use rayon::prelude::*;

use super::{PhaseTimings, SolveOutput, SolveReport, SolverConfig};
use crate::assembly::{
    build_patterns, fused_accumulate, AccumulationMode, AreaNormalBlocks, AssemblyPlan,
};
use crate::error::{Error, Result};
use crate::linalg::{schur_condense, DenseCholesky, DenseMatrix, LocalFactor, SchurResult};
use crate::measurement::{objective, MeasurementSet, RowTemplates, StateVector};
use crate::network::BusBranchNetwork;
use crate::partition::{
    build_variable_maps, AreaVariableMap, BoundaryOrdering, BusSlots, Partition, Quantity,
};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySystem {
    pub s_gamma: DenseMatrix,
    pub b_gamma: Vec<f64>,
    pub delta_x_gamma: Vec<f64>,
}

/// S_Γ = Σ E_kᵀ S_b^k E_k and b̂_Γ = Σ E_kᵀ b̂_b^k, summed in area order.
pub fn assemble_boundary(
    n_gamma: usize,
    contributions: &[(&SchurResult, &[usize])],
) -> BoundarySystem {
    let mut s_gamma = DenseMatrix::zeros(n_gamma, n_gamma);
    let mut b_gamma = vec![0.0; n_gamma];
    for (schur, selector) in contributions {
        for (a, &ga) in selector.iter().enumerate() {
            b_gamma[ga] += schur.b_hat[a];
            for (b, &gb) in selector.iter().enumerate() {
                s_gamma[(ga, gb)] += schur.s_b[(a, b)];
            }
        }
    }
    BoundarySystem {
        s_gamma,
        b_gamma,
        delta_x_gamma: Vec::new(),
    }
}

impl BoundarySystem {
    pub fn solve(&mut self) -> Result<&[f64]> {
        let factor = DenseCholesky::factor(&self.s_gamma).map_err(|e| match e {
            Error::NotPositiveDefinite { pivot } => Error::BoundaryNotSpd { pivot },
            other => other,
        })?;
        self.delta_x_gamma = factor.solve(&self.b_gamma);
        Ok(&self.delta_x_gamma)
    }
}

struct AreaWorker {
    map: AreaVariableMap,
    templates: RowTemplates,
    plan: AssemblyPlan,
    factor: LocalFactor,
    local_buses: Vec<usize>,
    local_slots: Vec<BusSlots>,
    va: Vec<f64>,
    vm: Vec<f64>,
    blocks: Option<AreaNormalBlocks>,
    schur: Option<SchurResult>,
}

impl AreaWorker {
    fn new(
        net: &BusBranchNetwork,
        ms: &MeasurementSet,
        map: AreaVariableMap,
        rows: Vec<usize>,
        config: &SolverConfig,
    ) -> Self {
        let templates = RowTemplates::compile(net, &map, ms, rows);
        let plan = build_patterns(&map, &templates);
        let factor = LocalFactor::analyze(&plan.g_ii, config.backend);
        let local_buses: Vec<usize> = map.local_buses().collect();
        let local_slots = local_buses
            .iter()
            .map(|&b| map.slots(b).expect("local bus"))
            .collect();
        let n = local_buses.len();
        AreaWorker {
            map,
            templates,
            plan,
            factor,
            local_buses,
            local_slots,
            va: vec![0.0; n],
            vm: vec![0.0; n],
            blocks: None,
            schur: None,
        }
    }

    fn load(&mut self, x: &StateVector) {
        for (p, &b) in self.local_buses.iter().enumerate() {
            self.va[p] = x.va[b];
            self.vm[p] = x.vm[b];
        }
    }

    fn local_error(&self, e: Error) -> Error {
        match e {
            Error::NotPositiveDefinite { pivot } => Error::AreaNotSpd {
                area: self.map.area,
                pivot,
            },
            other => other,
        }
    }

    /// Apply a step over the combined slot space; boundary entries may be
    /// absent (only interior updated).
    fn apply(&mut self, dx_i: &[f64], dx_b: Option<&[f64]>) {
        let n_i = self.map.n_interior;
        let at = |s: usize| {
            if s < n_i {
                Some(dx_i[s])
            } else {
                dx_b.map(|d| d[s - n_i])
            }
        };
        for (p, s) in self.local_slots.iter().enumerate() {
            if let Some(d) = s.angle.and_then(at) {
                self.va[p] += d;
            }
            if let Some(d) = at(s.magnitude) {
                self.vm[p] += d;
            }
        }
    }

    /// Fixed-boundary local GN steps, then the blocks for the coordinated step.
    fn assemble(
        &mut self,
        ms: &MeasurementSet,
        mode: AccumulationMode,
        inner_steps: usize,
    ) -> Result<()> {
        for _ in 1..inner_steps {
            let blocks =
                fused_accumulate(&self.plan, &self.templates, ms, &self.va, &self.vm, mode);
            self.factor
                .refactor(&blocks.g_ii)
                .map_err(|e| self.local_error(e))?;
            let dx_i = self.factor.solve(&blocks.b_i);
            self.apply(&dx_i, None);
        }
        self.blocks = Some(fused_accumulate(
            &self.plan,
            &self.templates,
            ms,
            &self.va,
            &self.vm,
            mode,
        ));
        Ok(())
    }

    fn condense(&mut self) -> Result<()> {
        let blocks = self.blocks.as_ref().expect("assemble before condense");
        self.factor
            .refactor(&blocks.g_ii)
            .map_err(|e| self.local_error(e))?;
        self.schur = Some(schur_condense(
            &self.factor,
            &blocks.g_ib,
            &blocks.g_bb,
            &blocks.b_i,
            &blocks.b_b,
        ));
        Ok(())
    }

    fn recover(&mut self, dx_gamma: &[f64]) {
        let dx_b: Vec<f64> = self
            .map
            .boundary_selector
            .iter()
            .map(|&g| dx_gamma[g])
            .collect();
        let dx_i = self
            .schur
            .as_ref()
            .expect("condense before recover")
            .recover(&self.factor, &dx_b);
        self.apply(&dx_i, Some(&dx_b));
    }
}

/// Persistent multi-area solver: templates, patterns and symbolic
/// factorizations are built once and reused across solves.
pub struct MultiAreaSolver<'a> {
    net: &'a BusBranchNetwork,
    ms: &'a MeasurementSet,
    config: SolverConfig,
    ordering: BoundaryOrdering,
    workers: Vec<AreaWorker>,
    setup_seconds: f64,
}

impl<'a> MultiAreaSolver<'a> {
    pub fn new(
        net: &'a BusBranchNetwork,
        ms: &'a MeasurementSet,
        part: &Partition,
        config: &SolverConfig,
    ) -> Result<Self> {
        let (ordering, maps) = build_variable_maps(net, part);
        Self::with_maps(net, ms, part, ordering, maps, config)
    }

    pub fn with_maps(
        net: &'a BusBranchNetwork,
        ms: &'a MeasurementSet,
        part: &Partition,
        ordering: BoundaryOrdering,
        maps: Vec<AreaVariableMap>,
        config: &SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        let start = Instant::now();
        let owners = ms.owner_areas(net, part);
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); part.k];
        for (row, &a) in owners.iter().enumerate() {
            rows[a].push(row);
        }
        let workers = maps
            .into_par_iter()
            .zip(rows)
            .map(|(map, rows)| AreaWorker::new(net, ms, map, rows, config))
            .collect();
        Ok(MultiAreaSolver {
            net,
            ms,
            config: config.clone(),
            ordering,
            workers,
            setup_seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn boundary_ordering(&self) -> &BoundaryOrdering {
        &self.ordering
    }

    pub fn setup_seconds(&self) -> f64 {
        self.setup_seconds
    }

    pub fn solve(&mut self) -> Result<SolveOutput> {
        let start = Instant::now();
        let mut timings = PhaseTimings::default();
        let (net, ms, config) = (self.net, self.ms, self.config.clone());
        let mode = if config.deterministic {
            AccumulationMode::Deterministic
        } else {
            AccumulationMode::Parallel
        };
        let n_gamma = self.ordering.n_gamma();

        let mut x = StateVector::flat(net);
        let mut iterates = Vec::new();
        if config.record_iterates {
            iterates.push(x.clone());
        }
        let mut history = vec![objective(net, ms, &x)];
        let mut step_norms = Vec::new();
        let mut converged = false;

        for _ in 0..config.max_outer_iterations {
            // (1)-(2a): broadcast and local assembly.
            let t = Instant::now();
            first_error(self.workers.par_iter_mut().map(|w| {
                w.load(&x);
                w.assemble(ms, mode, config.inner_gn_steps)
            }))?;
            PhaseTimings::add(&mut timings.assembly, t.elapsed());

            // (2b): local refactorization and Schur export.
            let t = Instant::now();
            first_error(self.workers.par_iter_mut().map(AreaWorker::condense))?;
            PhaseTimings::add(&mut timings.local_condense, t.elapsed());

            // (3)-(4): coordinator.
            let t = Instant::now();
            let contributions: Vec<(&SchurResult, &[usize])> = self
                .workers
                .iter()
                .map(|w| {
                    (
                        w.schur.as_ref().expect("condensed"),
                        w.map.boundary_selector.as_slice(),
                    )
                })
                .collect();
            let mut boundary = assemble_boundary(n_gamma, &contributions);
            PhaseTimings::add(&mut timings.boundary_assemble, t.elapsed());
            let t = Instant::now();
            let dx_gamma = boundary.solve()?.to_vec();
            PhaseTimings::add(&mut timings.boundary_solve, t.elapsed());

            // (5)-(6): scatter back, interior recovery, state update.
            let t = Instant::now();
            self.workers
                .par_iter_mut()
                .for_each(|w| w.recover(&dx_gamma));
            let prev = x.clone();
            for w in &self.workers {
                for (p, &b) in w
                    .local_buses
                    .iter()
                    .enumerate()
                    .take(w.map.internal_buses.len())
                {
                    x.va[b] = w.va[p];
                    x.vm[b] = w.vm[p];
                }
            }
            for (g, &(bus, q)) in self.ordering.entries.iter().enumerate() {
                match q {
                    Quantity::Angle => x.va[bus] += dx_gamma[g],
                    Quantity::Magnitude => x.vm[bus] += dx_gamma[g],
                }
            }
            PhaseTimings::add(&mut timings.recovery, t.elapsed());

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
            method: "multiarea".into(),
            iterations: step_norms.len(),
            objective: j,
            weighted_residual_norm: j.sqrt(),
            converged,
            final_step_norm: *step_norms.last().unwrap_or(&f64::INFINITY),
            boundary_dim: n_gamma,
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

    /// Local blocks and condensed systems at state `x`, without solving.
    pub fn condensed_at(
        &mut self,
        x: &StateVector,
    ) -> Result<Vec<(AreaNormalBlocks, SchurResult)>> {
        let mode = if self.config.deterministic {
            AccumulationMode::Deterministic
        } else {
            AccumulationMode::Parallel
        };
        let ms = self.ms;
        self.workers.iter_mut().try_for_each(|w| {
            w.load(x);
            w.assemble(ms, mode, 1)?;
            w.condense()
        })?;
        Ok(self
            .workers
            .iter()
            .map(|w| {
                (
                    w.blocks.clone().expect("assembled"),
                    w.schur.clone().expect("condensed"),
                )
            })
            .collect())
    }

    pub fn selectors(&self) -> Vec<&[usize]> {
        self.workers
            .iter()
            .map(|w| w.map.boundary_selector.as_slice())
            .collect()
    }
}

/// Collect in area order so the reported failure is the lowest failing area.
fn first_error(results: impl IndexedParallelIterator<Item = Result<()>>) -> Result<()> {
    results.collect::<Vec<_>>().into_iter().collect()
}

pub fn solve_multiarea(
    net: &BusBranchNetwork,
    ms: &MeasurementSet,
    part: &Partition,
    ordering: &BoundaryOrdering,
    maps: &[AreaVariableMap],
    config: &SolverConfig,
) -> Result<SolveOutput> {
    MultiAreaSolver::with_maps(net, ms, part, ordering.clone(), maps.to_vec(), config)?.solve()
}
