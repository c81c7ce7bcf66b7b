//! Typed measurement model, synthetic measurement generation and masking.

pub mod kernels;
mod template;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::BusBranchNetwork;
use crate::partition::{Partition, Quantity};

pub use template::{RowTemplates, RowWork, NO_SLOT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MeasurementType {
    Vm,
    Pinj,
    Qinj,
    Pf,
    Pt,
    Qf,
    Qt,
}

impl MeasurementType {
    pub const ALL: [MeasurementType; 7] = [
        MeasurementType::Vm,
        MeasurementType::Pinj,
        MeasurementType::Qinj,
        MeasurementType::Pf,
        MeasurementType::Pt,
        MeasurementType::Qf,
        MeasurementType::Qt,
    ];

    pub const FLOWS: [MeasurementType; 4] = [
        MeasurementType::Pf,
        MeasurementType::Pt,
        MeasurementType::Qf,
        MeasurementType::Qt,
    ];

    /// True when the target is a branch index rather than a bus index.
    pub fn is_branch(self) -> bool {
        matches!(self, Self::Pf | Self::Pt | Self::Qf | Self::Qt)
    }

    pub fn is_power(self) -> bool {
        self != Self::Vm
    }
}

impl fmt::Display for MeasurementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for MeasurementType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        MeasurementType::ALL
            .into_iter()
            .find(|t| t.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown measurement type '{s}'"))
    }
}

/// Per-bus voltages. The slack angle is carried here but is never an unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub va: Vec<f64>,
    pub vm: Vec<f64>,
}

impl StateVector {
    pub fn truth(net: &BusBranchNetwork) -> Self {
        StateVector {
            va: net.buses.iter().map(|b| b.va_true).collect(),
            vm: net.buses.iter().map(|b| b.vm_true).collect(),
        }
    }

    /// vm = 1 everywhere; every angle equal to the slack reference angle.
    pub fn flat(net: &BusBranchNetwork) -> Self {
        let reference = net.buses[net.slack()].va_true;
        StateVector {
            va: vec![reference; net.n_bus()],
            vm: vec![1.0; net.n_bus()],
        }
    }

    pub fn get(&self, bus: usize, q: Quantity) -> f64 {
        match q {
            Quantity::Angle => self.va[bus],
            Quantity::Magnitude => self.vm[bus],
        }
    }

    /// Largest absolute difference over all angles and magnitudes.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.va
            .iter()
            .zip(&other.va)
            .chain(self.vm.iter().zip(&other.vm))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Row parameters p_i: the buses a row touches, in kernel order, and the
/// admittance terms the kernel needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RowParams {
    pub kind: MeasurementType,
    pub buses: Vec<usize>,
    pub y: Vec<Complex64>,
}

pub fn row_params(net: &BusBranchNetwork, kind: MeasurementType, target: usize) -> RowParams {
    use MeasurementType::*;
    match kind {
        Vm => RowParams {
            kind,
            buses: vec![target],
            y: Vec::new(),
        },
        Pinj | Qinj => {
            let mut buses = vec![target];
            let mut y = vec![net.ybus.get(target, target)];
            for (j, v) in net.ybus.row(target) {
                if j != target {
                    buses.push(j);
                    y.push(v);
                }
            }
            RowParams { kind, buses, y }
        }
        Pf | Qf | Pt | Qt => {
            let br = &net.branches[target];
            let adm = br.admittance();
            if matches!(kind, Pf | Qf) {
                RowParams {
                    kind,
                    buses: vec![br.from_bus, br.to_bus],
                    y: vec![adm.yff, adm.yft],
                }
            } else {
                RowParams {
                    kind,
                    buses: vec![br.to_bus, br.from_bus],
                    y: vec![adm.ytt, adm.ytf],
                }
            }
        }
    }
}

fn gather(params: &RowParams, state: &StateVector) -> (Vec<f64>, Vec<f64>) {
    (
        params.buses.iter().map(|&b| state.va[b]).collect(),
        params.buses.iter().map(|&b| state.vm[b]).collect(),
    )
}

pub fn eval_h(params: &RowParams, state: &StateVector) -> f64 {
    let (va, vm) = gather(params, state);
    kernels::eval_row(params.kind, &params.y, &va, &vm, None)
}

/// ∂h/∂x over the row's template variables, slack angle omitted.
pub fn eval_row_gradient(
    params: &RowParams,
    state: &StateVector,
    slack: usize,
) -> Vec<((usize, Quantity), f64)> {
    let (va, vm) = gather(params, state);
    let nb = params.buses.len();
    let mut grad = vec![0.0; 2 * nb];
    kernels::eval_row(params.kind, &params.y, &va, &vm, Some(&mut grad));
    let mut out = Vec::with_capacity(2 * nb);
    if params.kind != MeasurementType::Vm {
        for (p, &b) in params.buses.iter().enumerate() {
            if b != slack {
                out.push(((b, Quantity::Angle), grad[p]));
            }
        }
    }
    for (p, &b) in params.buses.iter().enumerate() {
        out.push(((b, Quantity::Magnitude), grad[nb + p]));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub types: Vec<MeasurementType>,
    pub sigma_vm: f64,
    pub sigma_power: f64,
    /// Multiplies the added noise; 0 gives exact h(x_true) values while the
    /// weights still follow the σ values above.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            types: MeasurementType::ALL.to_vec(),
            sigma_vm: 0.01,
            sigma_power: 0.02,
            noise_scale: 1.0,
            seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn noiseless(mut self) -> Self {
        self.noise_scale = 0.0;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// One measurement as stored in measurement files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    #[serde(rename = "type")]
    pub kind: MeasurementType,
    /// Bus index for bus quantities, branch index for flows (0-based).
    pub target: usize,
    pub z: f64,
    pub sigma: f64,
    pub active: bool,
}

/// Structure-of-arrays measurement storage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementSet {
    pub kind: Vec<MeasurementType>,
    pub target: Vec<usize>,
    pub z: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Nominal weight 1/σ².
    pub weight: Vec<f64>,
    pub active: Vec<bool>,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.kind.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kind.is_empty()
    }

    pub fn push(&mut self, kind: MeasurementType, target: usize, z: f64, sigma: f64, active: bool) {
        self.kind.push(kind);
        self.target.push(target);
        self.z.push(z);
        self.sigma.push(sigma);
        self.weight.push(1.0 / (sigma * sigma));
        self.active.push(active);
    }

    /// Weight seen by the estimator: zero for masked rows.
    #[inline]
    pub fn effective_weight(&self, row: usize) -> f64 {
        if self.active[row] {
            self.weight[row]
        } else {
            0.0
        }
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn records(&self) -> Vec<MeasurementRecord> {
        (0..self.len())
            .map(|i| MeasurementRecord {
                kind: self.kind[i],
                target: self.target[i],
                z: self.z[i],
                sigma: self.sigma[i],
                active: self.active[i],
            })
            .collect()
    }

    pub fn from_records(net: &BusBranchNetwork, records: &[MeasurementRecord]) -> Result<Self> {
        let mut ms = MeasurementSet::default();
        for (i, r) in records.iter().enumerate() {
            let limit = if r.kind.is_branch() {
                net.n_branch()
            } else {
                net.n_bus()
            };
            if r.target >= limit {
                return Err(Error::InvalidMeasurement(format!(
                    "row {i}: {} target {} out of range",
                    r.kind, r.target
                )));
            }
            if !(r.sigma > 0.0) {
                return Err(Error::InvalidMeasurement(format!(
                    "row {i}: sigma must be positive"
                )));
            }
            ms.push(r.kind, r.target, r.z, r.sigma, r.active);
        }
        Ok(ms)
    }

    pub fn params(&self, net: &BusBranchNetwork, row: usize) -> RowParams {
        row_params(net, self.kind[row], self.target[row])
    }

    /// Owning area of each row: bus rows go to the bus's area, branch rows
    /// to the from-bus's area.
    pub fn owner_areas(&self, net: &BusBranchNetwork, part: &Partition) -> Vec<usize> {
        (0..self.len())
            .map(|i| {
                let bus = if self.kind[i].is_branch() {
                    net.branches[self.target[i]].from_bus
                } else {
                    self.target[i]
                };
                part.area_of_bus[bus]
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records()).expect("records serialize")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("type,target,z,sigma,active\n");
        for r in self.records() {
            out.push_str(&format!(
                "{},{},{:?},{:?},{}\n",
                r.kind, r.target, r.z, r.sigma, r.active
            ));
        }
        out
    }

    pub fn from_json(net: &BusBranchNetwork, text: &str) -> Result<Self> {
        let records: Vec<MeasurementRecord> = serde_json::from_str(text)?;
        Self::from_records(net, &records)
    }

    pub fn from_csv(net: &BusBranchNetwork, text: &str) -> Result<Self> {
        let mut records = Vec::new();
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, header)) if header.trim() == "type,target,z,sigma,active" => {}
            _ => {
                return Err(Error::InvalidMeasurement(
                    "missing header type,target,z,sigma,active".into(),
                ))
            }
        }
        for (lineno, line) in lines {
            let bad =
                |what: &str| Error::InvalidMeasurement(format!("line {}: bad {what}", lineno + 1));
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 5 {
                return Err(bad("column count"));
            }
            records.push(MeasurementRecord {
                kind: cols[0].parse().map_err(|_| bad("type"))?,
                target: cols[1].parse().map_err(|_| bad("target"))?,
                z: cols[2].parse().map_err(|_| bad("z"))?,
                sigma: cols[3].parse().map_err(|_| bad("sigma"))?,
                active: cols[4].parse().map_err(|_| bad("active"))?,
            });
        }
        Self::from_records(net, &records)
    }
}

/// z_i = h(x_true) + N(0, σ²) with full default coverage: Vm, Pinj and Qinj
/// at every bus, then Pf, Pt, Qf, Qt on every branch.
pub fn generate_measurements(net: &BusBranchNetwork, cfg: &GenerationConfig) -> MeasurementSet {
    let truth = StateVector::truth(net);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ms = MeasurementSet::default();
    for kind in MeasurementType::ALL {
        if !cfg.types.contains(&kind) {
            continue;
        }
        let sigma = if kind.is_power() {
            cfg.sigma_power
        } else {
            cfg.sigma_vm
        };
        let noise = Normal::new(0.0, sigma * cfg.noise_scale).expect("finite sigma");
        let count = if kind.is_branch() {
            net.n_branch()
        } else {
            net.n_bus()
        };
        for target in 0..count {
            let h = eval_h(&row_params(net, kind, target), &truth);
            let e = if cfg.noise_scale == 0.0 {
                0.0
            } else {
                noise.sample(&mut rng)
            };
            ms.push(kind, target, h + e, sigma, true);
        }
    }
    ms
}

/// Which rows a mask selects.
#[derive(Clone, Copy)]
pub enum MaskFamily<'a> {
    Type(MeasurementType),
    Rows(&'a dyn Fn(usize, MeasurementType, usize) -> bool),
}

impl std::fmt::Debug for MaskFamily<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaskFamily::Type(t) => write!(f, "Type({t})"),
            MaskFamily::Rows(_) => f.write_str("Rows(..)"),
        }
    }
}

impl MaskFamily<'_> {
    fn selects(&self, row: usize, kind: MeasurementType, target: usize) -> bool {
        match self {
            MaskFamily::Type(t) => *t == kind,
            MaskFamily::Rows(f) => f(row, kind, target),
        }
    }
}

/// Deactivate the selected rows. Row count and order are untouched, so
/// compiled templates stay valid.
pub fn apply_mask(ms: &MeasurementSet, family: MaskFamily<'_>) -> MeasurementSet {
    set_active(ms, family, false)
}

pub fn unmask(ms: &MeasurementSet, family: MaskFamily<'_>) -> MeasurementSet {
    set_active(ms, family, true)
}

fn set_active(ms: &MeasurementSet, family: MaskFamily<'_>, value: bool) -> MeasurementSet {
    let mut out = ms.clone();
    for i in 0..ms.len() {
        if family.selects(i, ms.kind[i], ms.target[i]) {
            out.active[i] = value;
        }
    }
    out
}

/// Weighted least-squares objective Σ w_i (z_i − h_i(x))² over active rows.
pub fn objective(net: &BusBranchNetwork, ms: &MeasurementSet, state: &StateVector) -> f64 {
    (0..ms.len())
        .filter(|&i| ms.active[i])
        .map(|i| {
            let r = ms.z[i] - eval_h(&ms.params(net, i), state);
            ms.weight[i] * r * r
        })
        .sum()
}
