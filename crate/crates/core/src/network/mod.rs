//! Bus-branch network model and nodal admittance matrix.

mod case;
pub mod synthetic;

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use case::{parse_case, to_native_json, CaseFormat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// External label from the case file.
    pub id: i64,
    #[serde(default)]
    pub base_kv: f64,
    /// Shunt conductance in p.u.
    #[serde(default)]
    pub gs: f64,
    /// Shunt susceptance in p.u.
    #[serde(default)]
    pub bs: f64,
    #[serde(default)]
    pub is_slack: bool,
    pub vm_true: f64,
    /// Radians.
    pub va_true: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b_charging: f64,
    #[serde(default = "default_tap")]
    pub tap: f64,
    /// Radians.
    #[serde(default)]
    pub shift: f64,
    #[serde(default = "default_true")]
    pub in_service: bool,
}

fn default_tap() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// Two-port admittances of a π-model branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchAdmittance {
    pub yff: Complex64,
    pub yft: Complex64,
    pub ytf: Complex64,
    pub ytt: Complex64,
}

impl Branch {
    pub fn admittance(&self) -> BranchAdmittance {
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(self.r, self.x);
        let half_charging = Complex64::new(0.0, self.b_charging / 2.0);
        let ratio = Complex64::from_polar(self.tap, self.shift);
        let ytt = ys + half_charging;
        BranchAdmittance {
            yff: ytt / (self.tap * self.tap),
            yft: -ys / ratio.conj(),
            ytf: -ys / ratio,
            ytt,
        }
    }
}

/// Compressed sparse row matrix with complex entries and sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexCsr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl ComplexCsr {
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(p) => self.values[span.start + p],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut out = vec![vec![Complex64::new(0.0, 0.0); self.n]; self.n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub neighbor: usize,
    pub branch: usize,
}

#[derive(Debug, Clone)]
pub struct BusBranchNetwork {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub ybus: ComplexCsr,
    /// Per bus, incident branches with the opposite endpoint, in branch order.
    pub adjacency: Vec<Vec<Incidence>>,
    slack: usize,
    id_map: HashMap<i64, usize>,
}

impl PartialEq for BusBranchNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.base_mva == other.base_mva
            && self.buses == other.buses
            && self.branches == other.branches
    }
}

impl BusBranchNetwork {
    /// Validates the raw bus/branch lists and builds derived structures.
    ///
    /// Out-of-service branches are dropped. The network must be connected
    /// afterwards.
    pub fn new(base_mva: f64, buses: Vec<Bus>, branches: Vec<Branch>) -> Result<Self> {
        let mut id_map = HashMap::with_capacity(buses.len());
        for (i, bus) in buses.iter().enumerate() {
            if id_map.insert(bus.id, i).is_some() {
                return Err(Error::InvalidNetwork(format!(
                    "duplicate bus id {}",
                    bus.id
                )));
            }
            if !(bus.vm_true > 0.0) {
                return Err(Error::InvalidNetwork(format!(
                    "bus {} has non-positive voltage magnitude",
                    bus.id
                )));
            }
        }
        let slacks: Vec<usize> = (0..buses.len()).filter(|&i| buses[i].is_slack).collect();
        if slacks.len() != 1 {
            return Err(Error::SlackCount(slacks.len()));
        }
        let n = buses.len();
        let branches: Vec<Branch> = branches.into_iter().filter(|br| br.in_service).collect();
        for (k, br) in branches.iter().enumerate() {
            if br.from_bus >= n || br.to_bus >= n {
                return Err(Error::InvalidNetwork(format!(
                    "branch {k} references bus index out of range"
                )));
            }
            if br.from_bus == br.to_bus {
                return Err(Error::InvalidNetwork(format!("branch {k} is a self loop")));
            }
            if br.r == 0.0 && br.x == 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "branch {k} has zero impedance"
                )));
            }
            if !(br.tap > 0.0) {
                return Err(Error::InvalidNetwork(format!(
                    "branch {k} has non-positive tap"
                )));
            }
        }

        let mut adjacency = vec![Vec::new(); n];
        for (k, br) in branches.iter().enumerate() {
            adjacency[br.from_bus].push(Incidence {
                neighbor: br.to_bus,
                branch: k,
            });
            adjacency[br.to_bus].push(Incidence {
                neighbor: br.from_bus,
                branch: k,
            });
        }

        let components = count_components(n, &adjacency);
        if components > 1 {
            return Err(Error::Disconnected { components });
        }

        let mut net = BusBranchNetwork {
            base_mva,
            buses,
            branches,
            ybus: ComplexCsr {
                n: 0,
                row_ptr: vec![0],
                col_idx: vec![],
                values: vec![],
            },
            adjacency,
            slack: slacks[0],
            id_map,
        };
        net.ybus = build_ybus(&net);
        Ok(net)
    }

    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    pub fn n_branch(&self) -> usize {
        self.branches.len()
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    pub fn index_of(&self, id: i64) -> Option<usize> {
        self.id_map.get(&id).copied()
    }

    /// Distinct neighbor buses of `bus`, ascending.
    pub fn neighbors(&self, bus: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.adjacency[bus].iter().map(|inc| inc.neighbor).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn count_components(n: usize, adjacency: &[Vec<Incidence>]) -> usize {
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for inc in &adjacency[u] {
                if !seen[inc.neighbor] {
                    seen[inc.neighbor] = true;
                    queue.push_back(inc.neighbor);
                }
            }
        }
    }
    components
}

/// Nodal admittance matrix from the π-model of each branch plus bus shunts.
pub fn build_ybus(net: &BusBranchNetwork) -> ComplexCsr {
    let n = net.n_bus();
    let mut rows: Vec<BTreeMap<usize, Complex64>> = (0..n)
        .map(|i| {
            let mut row = BTreeMap::new();
            let bus = &net.buses[i];
            row.insert(i, Complex64::new(bus.gs, bus.bs));
            row
        })
        .collect();
    for br in &net.branches {
        let y = br.admittance();
        let (f, t) = (br.from_bus, br.to_bus);
        *rows[f].entry(f).or_default() += y.yff;
        *rows[f].entry(t).or_default() += y.yft;
        *rows[t].entry(f).or_default() += y.ytf;
        *rows[t].entry(t).or_default() += y.ytt;
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for row in rows {
        for (j, v) in row {
            col_idx.push(j);
            values.push(v);
        }
        row_ptr.push(col_idx.len());
    }
    ComplexCsr {
        n,
        row_ptr,
        col_idx,
        values,
    }
}
