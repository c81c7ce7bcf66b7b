//! Centralized WLS-GN baseline and the hierarchical boundary-condensed
//! multi-area estimator.

mod centralized;
mod multiarea;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::linalg::Backend;
use crate::measurement::StateVector;

pub use centralized::solve_centralized;
pub use multiarea::{assemble_boundary, solve_multiarea, BoundarySystem, MultiAreaSolver};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_outer_iterations: usize,
    /// GN steps each area takes per coordination round; all but the last
    /// keep the boundary fixed.
    pub inner_gn_steps: usize,
    /// Threshold on the stacked ‖Δx‖∞.
    pub convergence_tol: f64,
    pub deterministic: bool,
    pub backend: Backend,
    /// Keep every iterate in the output (for lockstep comparisons).
    #[serde(default)]
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_outer_iterations: 10,
            inner_gn_steps: 1,
            convergence_tol: 1e-6,
            deterministic: true,
            backend: Backend::Auto,
            record_iterates: false,
        }
    }
}

impl SolverConfig {
    pub(crate) fn validate(&self) -> crate::Result<()> {
        if self.max_outer_iterations == 0
            || self.inner_gn_steps == 0
            || !(self.convergence_tol > 0.0)
        {
            return Err(crate::Error::Dimension(
                "solver config needs max_outer_iterations >= 1, inner_gn_steps >= 1 and tol > 0"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Wall-clock seconds per phase. The centralized solver books its
/// factorization and solve under `local_condense`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub assembly: f64,
    pub local_condense: f64,
    pub boundary_assemble: f64,
    pub boundary_solve: f64,
    pub recovery: f64,
    pub total: f64,
}

impl PhaseTimings {
    /// (boundary assembly + boundary solve) / total.
    pub fn coordinator_share(&self) -> f64 {
        if self.total > 0.0 {
            ((self.boundary_assemble + self.boundary_solve) / self.total).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub(crate) fn add(slot: &mut f64, d: Duration) {
        *slot += d.as_secs_f64();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: String,
    pub iterations: usize,
    pub objective: f64,
    /// √J
    pub weighted_residual_norm: f64,
    pub converged: bool,
    pub final_step_norm: f64,
    pub boundary_dim: usize,
    /// J at the start point and after every iteration.
    pub objective_history: Vec<f64>,
    pub step_norms: Vec<f64>,
    pub timings: PhaseTimings,
}

impl SolveReport {
    /// Numerical content with timings stripped, for reproducibility checks.
    pub fn numerics(&self) -> SolveReport {
        SolveReport {
            timings: PhaseTimings::default(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutput {
    pub state: StateVector,
    pub report: SolveReport,
    /// Start point then every iterate, when `record_iterates` is set.
    pub iterates: Vec<StateVector>,
}
