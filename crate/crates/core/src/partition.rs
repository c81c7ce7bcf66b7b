//! Multi-area decomposition: area assignment, cut branches, boundary buses
//! and the per-area variable maps that link local boundary vectors to x_Γ.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::BusBranchNetwork;

const UNASSIGNED: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreaPair {
    pub a: usize,
    pub b: usize,
    pub tie_lines: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub k: usize,
    pub area_of_bus: Vec<usize>,
    pub cut_branches: Vec<usize>,
    /// Terminal buses of cut branches, ascending.
    pub boundary_buses: Vec<usize>,
    pub area_pairs: Vec<AreaPair>,
}

/// On-disk partition description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub k: usize,
    pub area_of_bus: Vec<usize>,
}

impl Partition {
    pub fn area_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.area_of_bus {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn is_boundary(&self, bus: usize) -> bool {
        self.boundary_buses.binary_search(&bus).is_ok()
    }

    pub fn to_file(&self) -> PartitionFile {
        PartitionFile {
            k: self.k,
            area_of_bus: self.area_of_bus.clone(),
        }
    }
}

/// Seeded multi-source BFS region growing followed by a balancing pass.
///
/// Seeds are spread by graph distance (farthest-point sampling from a random
/// start), areas grow smallest-first one frontier bus at a time, and the
/// refinement pass moves boundary buses from a larger to a smaller adjacent
/// area while both stay connected. Areas are numbered by their lowest bus.
pub fn partition_network(net: &BusBranchNetwork, k: usize, seed: u64) -> Result<Partition> {
    let n = net.n_bus();
    if k == 0 || k > n {
        return Err(Error::InfeasiblePartition(format!(
            "k = {k} not in 1..={n}"
        )));
    }
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| net.neighbors(i)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..n);
    let mut seeds = vec![farthest(&bfs_distances(&neighbors, &[start]))];
    while seeds.len() < k {
        let dist = bfs_distances(&neighbors, &seeds);
        seeds.push(farthest(&dist));
    }

    let mut area_of = vec![UNASSIGNED; n];
    let mut sizes = vec![0usize; k];
    let mut frontier: Vec<VecDeque<usize>> = vec![VecDeque::new(); k];
    for (a, &s) in seeds.iter().enumerate() {
        area_of[s] = a;
        sizes[a] = 1;
    }
    for (a, &s) in seeds.iter().enumerate() {
        frontier[a].extend(
            neighbors[s]
                .iter()
                .copied()
                .filter(|&v| area_of[v] == UNASSIGNED),
        );
    }
    let mut assigned = k;
    while assigned < n {
        let mut grown = false;
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&a| (sizes[a], a));
        for a in order {
            while frontier[a]
                .front()
                .is_some_and(|&v| area_of[v] != UNASSIGNED)
            {
                frontier[a].pop_front();
            }
            if let Some(v) = frontier[a].pop_front() {
                area_of[v] = a;
                sizes[a] += 1;
                assigned += 1;
                frontier[a].extend(
                    neighbors[v]
                        .iter()
                        .copied()
                        .filter(|&u| area_of[u] == UNASSIGNED),
                );
                grown = true;
                break;
            }
        }
        if !grown {
            let failing = (0..k).min_by_key(|&a| sizes[a]).unwrap_or(0);
            return Err(Error::InfeasiblePartition(format!(
                "area {failing} cannot grow: {} buses unreachable",
                n - assigned
            )));
        }
    }

    refine_balance(&neighbors, &mut area_of, &mut sizes);

    // Canonical numbering by lowest member bus.
    let mut first_bus = vec![usize::MAX; k];
    for (bus, &a) in area_of.iter().enumerate() {
        first_bus[a] = first_bus[a].min(bus);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&a| first_bus[a]);
    let mut relabel = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    let area_of: Vec<usize> = area_of.iter().map(|&a| relabel[a]).collect();
    load_partition(net, &area_of)
}

fn bfs_distances(neighbors: &[Vec<usize>], sources: &[usize]) -> Vec<usize> {
    let mut dist = vec![usize::MAX; neighbors.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        dist[s] = 0;
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        for &v in &neighbors[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Lowest-index bus at maximum distance.
fn farthest(dist: &[usize]) -> usize {
    let mut best = 0;
    for (i, &d) in dist.iter().enumerate() {
        if d != usize::MAX && d > dist[best] {
            best = i;
        }
    }
    best
}

fn refine_balance(neighbors: &[Vec<usize>], area_of: &mut [usize], sizes: &mut [usize]) {
    let n = area_of.len();
    // Each move strictly lowers the sum of squared sizes, so this terminates.
    loop {
        let mut moved = false;
        for v in 0..n {
            let from = area_of[v];
            let mut targets: Vec<usize> = neighbors[v]
                .iter()
                .map(|&u| area_of[u])
                .filter(|&a| a != from && sizes[from] >= sizes[a] + 2)
                .collect();
            targets.sort_by_key(|&a| (sizes[a], a));
            targets.dedup();
            let Some(&to) = targets.first() else { continue };
            if !stays_connected_without(neighbors, area_of, from, v) {
                continue;
            }
            area_of[v] = to;
            sizes[from] -= 1;
            sizes[to] += 1;
            moved = true;
        }
        if !moved {
            break;
        }
    }
}

fn stays_connected_without(
    neighbors: &[Vec<usize>],
    area_of: &[usize],
    area: usize,
    removed: usize,
) -> bool {
    let members: Vec<usize> = (0..area_of.len())
        .filter(|&b| area_of[b] == area && b != removed)
        .collect();
    let Some(&start) = members.first() else {
        return false;
    };
    let mut seen = HashMap::new();
    seen.insert(start, ());
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &w in &neighbors[u] {
            if w != removed && area_of[w] == area && seen.insert(w, ()).is_none() {
                queue.push_back(w);
            }
        }
    }
    seen.len() == members.len()
}

/// Build a partition from an explicit area assignment, validating that each
/// area is nonempty and connected.
pub fn load_partition(net: &BusBranchNetwork, area_of_bus: &[usize]) -> Result<Partition> {
    let n = net.n_bus();
    if area_of_bus.len() != n {
        return Err(Error::InfeasiblePartition(format!(
            "assignment lists {} buses, network has {n}",
            area_of_bus.len()
        )));
    }
    let k = area_of_bus.iter().copied().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (bus, &a) in area_of_bus.iter().enumerate() {
        members[a].push(bus);
    }
    if let Some(empty) = members.iter().position(|m| m.is_empty()) {
        return Err(Error::InfeasiblePartition(format!("area {empty} is empty")));
    }
    for (area, buses) in members.iter().enumerate() {
        let components = area_components(net, area_of_bus, area, buses);
        if components.len() > 1 {
            return Err(Error::DisconnectedArea { area, components });
        }
    }

    let mut cut_branches = Vec::new();
    let mut boundary = Vec::new();
    let mut pairs: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (idx, br) in net.branches.iter().enumerate() {
        let (a, b) = (area_of_bus[br.from_bus], area_of_bus[br.to_bus]);
        if a != b {
            cut_branches.push(idx);
            boundary.push(br.from_bus);
            boundary.push(br.to_bus);
            *pairs.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    boundary.sort_unstable();
    boundary.dedup();
    Ok(Partition {
        k,
        area_of_bus: area_of_bus.to_vec(),
        cut_branches,
        boundary_buses: boundary,
        area_pairs: pairs
            .into_iter()
            .map(|((a, b), tie_lines)| AreaPair { a, b, tie_lines })
            .collect(),
    })
}

pub fn load_partition_file(net: &BusBranchNetwork, file: &PartitionFile) -> Result<Partition> {
    let part = load_partition(net, &file.area_of_bus)?;
    if part.k != file.k {
        return Err(Error::InfeasiblePartition(format!(
            "file declares k = {} but assignment uses {} areas",
            file.k, part.k
        )));
    }
    Ok(part)
}

fn area_components(
    net: &BusBranchNetwork,
    area_of: &[usize],
    area: usize,
    buses: &[usize],
) -> Vec<Vec<usize>> {
    let mut seen = vec![false; net.n_bus()];
    let mut components = Vec::new();
    for &start in buses {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for inc in &net.adjacency[u] {
                let v = inc.neighbor;
                if area_of[v] == area && !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quantity {
    Angle,
    Magnitude,
}

/// Layout of the global boundary vector x_Γ: boundary angles (ascending
/// bus, slack excluded) followed by boundary magnitudes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BoundaryOrdering {
    pub entries: Vec<(usize, Quantity)>,
}

impl BoundaryOrdering {
    pub fn new(boundary_buses: &[usize], slack: usize) -> Self {
        let mut entries: Vec<(usize, Quantity)> = boundary_buses
            .iter()
            .filter(|&&b| b != slack)
            .map(|&b| (b, Quantity::Angle))
            .collect();
        entries.extend(boundary_buses.iter().map(|&b| (b, Quantity::Magnitude)));
        BoundaryOrdering { entries }
    }

    pub fn n_gamma(&self) -> usize {
        self.entries.len()
    }

    pub fn index_of(&self, bus: usize, q: Quantity) -> Option<usize> {
        // Two ascending blocks; search the matching one.
        let split = self
            .entries
            .iter()
            .position(|e| e.1 == Quantity::Magnitude)
            .unwrap_or(self.entries.len());
        let (block, offset) = match q {
            Quantity::Angle => (&self.entries[..split], 0),
            Quantity::Magnitude => (&self.entries[split..], split),
        };
        block
            .binary_search_by_key(&bus, |e| e.0)
            .ok()
            .map(|p| p + offset)
    }
}

/// Boundary dimension implied by the slack-angle exclusion rule.
pub fn boundary_dimension(n_boundary_buses: usize, slack_on_boundary: bool) -> usize {
    2 * n_boundary_buses - usize::from(slack_on_boundary)
}

/// Variable slots of one bus: angle slot (absent for the slack) and
/// magnitude slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusSlots {
    pub angle: Option<usize>,
    pub magnitude: usize,
}

/// Local variable layout of one area.
///
/// Combined slot space: interior slots `0..n_interior`, then local boundary
/// slots `n_interior..n_interior + n_boundary`. Each block stacks angles
/// (ascending bus, slack excluded) then magnitudes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AreaVariableMap {
    pub area: usize,
    pub internal_buses: Vec<usize>,
    pub local_boundary_buses: Vec<usize>,
    pub interior_index: HashMap<usize, BusSlots>,
    pub boundary_index: HashMap<usize, BusSlots>,
    pub n_interior: usize,
    /// For each local boundary variable, its index in x_Γ (the rows of E_k).
    pub boundary_selector: Vec<usize>,
}

impl AreaVariableMap {
    pub fn n_boundary(&self) -> usize {
        self.boundary_selector.len()
    }

    pub fn n_total(&self) -> usize {
        self.n_interior + self.n_boundary()
    }

    /// Internal buses followed by local boundary buses.
    pub fn local_buses(&self) -> impl Iterator<Item = usize> + '_ {
        self.internal_buses
            .iter()
            .chain(self.local_boundary_buses.iter())
            .copied()
    }

    /// Slots of `bus` in the combined local space, if the area sees it.
    pub fn slots(&self, bus: usize) -> Option<BusSlots> {
        if let Some(s) = self.interior_index.get(&bus) {
            return Some(*s);
        }
        self.boundary_index.get(&bus).map(|s| BusSlots {
            angle: s.angle.map(|a| a + self.n_interior),
            magnitude: s.magnitude + self.n_interior,
        })
    }

    /// A single area holding every bus as interior: the centralized layout
    /// (non-slack angles then all magnitudes, dimension 2n - 1).
    pub fn centralized(net: &BusBranchNetwork) -> Self {
        let buses: Vec<usize> = (0..net.n_bus()).collect();
        let (interior_index, n_interior) = stacked_slots(&buses, net.slack());
        AreaVariableMap {
            area: 0,
            internal_buses: buses,
            local_boundary_buses: Vec::new(),
            interior_index,
            boundary_index: HashMap::new(),
            n_interior,
            boundary_selector: Vec::new(),
        }
    }
}

fn stacked_slots(buses: &[usize], slack: usize) -> (HashMap<usize, BusSlots>, usize) {
    let n_angles = buses.iter().filter(|&&b| b != slack).count();
    let mut index = HashMap::with_capacity(buses.len());
    let mut next_angle = 0;
    for (pos, &b) in buses.iter().enumerate() {
        let angle = (b != slack).then(|| {
            next_angle += 1;
            next_angle - 1
        });
        index.insert(
            b,
            BusSlots {
                angle,
                magnitude: n_angles + pos,
            },
        );
    }
    (index, n_angles + buses.len())
}

/// Derive x_Γ and every area's local variable map.
///
/// An area's local boundary buses are its own boundary buses plus the far
/// endpoints of its tie-lines, which is exactly the set needed to evaluate
/// every measurement assigned to the area.
pub fn build_variable_maps(
    net: &BusBranchNetwork,
    part: &Partition,
) -> (BoundaryOrdering, Vec<AreaVariableMap>) {
    let slack = net.slack();
    let ordering = BoundaryOrdering::new(&part.boundary_buses, slack);
    let mut internal: Vec<Vec<usize>> = vec![Vec::new(); part.k];
    let mut local_boundary: Vec<Vec<usize>> = vec![Vec::new(); part.k];
    for bus in 0..net.n_bus() {
        let a = part.area_of_bus[bus];
        if part.is_boundary(bus) {
            local_boundary[a].push(bus);
        } else {
            internal[a].push(bus);
        }
    }
    for &idx in &part.cut_branches {
        let br = &net.branches[idx];
        let (af, at) = (part.area_of_bus[br.from_bus], part.area_of_bus[br.to_bus]);
        local_boundary[af].push(br.to_bus);
        local_boundary[at].push(br.from_bus);
    }
    let maps = (0..part.k)
        .map(|area| {
            let mut lb = std::mem::take(&mut local_boundary[area]);
            lb.sort_unstable();
            lb.dedup();
            let (interior_index, n_interior) = stacked_slots(&internal[area], slack);
            let (boundary_index, n_boundary) = stacked_slots(&lb, slack);
            let mut selector = vec![0; n_boundary];
            for &b in &lb {
                let s = boundary_index[&b];
                if let Some(a) = s.angle {
                    selector[a] = ordering
                        .index_of(b, Quantity::Angle)
                        .expect("boundary angle");
                }
                selector[s.magnitude] = ordering
                    .index_of(b, Quantity::Magnitude)
                    .expect("boundary magnitude");
            }
            AreaVariableMap {
                area,
                internal_buses: std::mem::take(&mut internal[area]),
                local_boundary_buses: lb,
                interior_index,
                boundary_index,
                n_interior,
                boundary_selector: selector,
            }
        })
        .collect();
    (ordering, maps)
}
