//! Gauss-Newton normal-equation blocks per area.
//!
//! The fused path evaluates each row's residual and template gradient once
//! and scatters `w·g_a·g_b` and `w·r·g_a` straight into G_ii, G_ib, G_bb,
//! b_i and b_b through precomputed positions; no Jacobian is stored. The
//! explicit path materializes H and forms HᵀWH by a sparse product, and is
//! kept as the oracle and for the centralized baseline.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::linalg::{CsrMatrix, CsrPattern, DenseMatrix};
use crate::measurement::{MeasurementSet, RowTemplates, RowWork, NO_SLOT};
use crate::partition::AreaVariableMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AccumulationMode {
    /// Contributions summed in row order: bitwise reproducible.
    #[default]
    Deterministic,
    /// Rows split across threads, partial blocks summed afterwards.
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaNormalBlocks {
    pub g_ii: CsrMatrix,
    pub g_ib: CsrMatrix,
    pub g_bb: DenseMatrix,
    pub b_i: Vec<f64>,
    pub b_b: Vec<f64>,
}

impl AreaNormalBlocks {
    fn zeros(plan: &AssemblyPlan) -> Self {
        AreaNormalBlocks {
            g_ii: CsrMatrix::zeros(plan.g_ii.clone()),
            g_ib: CsrMatrix::zeros(plan.g_ib.clone()),
            g_bb: DenseMatrix::zeros(plan.n_boundary, plan.n_boundary),
            b_i: vec![0.0; plan.n_interior],
            b_b: vec![0.0; plan.n_boundary],
        }
    }

    fn add_assign(&mut self, other: &AreaNormalBlocks) {
        let add = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.g_ii.values, &other.g_ii.values);
        add(&mut self.g_ib.values, &other.g_ib.values);
        add(&mut self.g_bb.data, &other.g_bb.data);
        add(&mut self.b_i, &other.b_i);
        add(&mut self.b_b, &other.b_b);
    }

    /// Full local matrix [[G_ii, G_ib], [G_bi, G_bb]] and rhs, dense.
    pub fn to_dense_system(&self) -> (DenseMatrix, Vec<f64>) {
        let (n_i, n_b) = (self.b_i.len(), self.b_b.len());
        let mut g = DenseMatrix::zeros(n_i + n_b, n_i + n_b);
        let ii = self.g_ii.to_dense();
        let ib = self.g_ib.to_dense();
        for r in 0..n_i {
            for c in 0..n_i {
                g[(r, c)] = ii[(r, c)];
            }
            for c in 0..n_b {
                g[(r, n_i + c)] = ib[(r, c)];
                g[(n_i + c, r)] = ib[(r, c)];
            }
        }
        for r in 0..n_b {
            for c in 0..n_b {
                g[(n_i + r, n_i + c)] = self.g_bb[(r, c)];
            }
        }
        let mut b = self.b_i.clone();
        b.extend_from_slice(&self.b_b);
        (g, b)
    }

    /// Matrix-market style text dump of the five blocks.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        let mut section =
            |name: &str, rows: usize, cols: usize, entries: Vec<(usize, usize, f64)>| {
                out.push_str(&format!("% {name}\n{rows} {cols} {}\n", entries.len()));
                for (r, c, v) in entries {
                    out.push_str(&format!("{} {} {v:e}\n", r + 1, c + 1));
                }
            };
        let csr_entries = |m: &CsrMatrix| {
            (0..m.n_rows())
                .flat_map(|i| {
                    (m.pattern.row_ptr[i]..m.pattern.row_ptr[i + 1])
                        .map(move |p| (i, m.pattern.col_idx[p], m.values[p]))
                })
                .collect::<Vec<_>>()
        };
        section(
            "g_ii",
            self.g_ii.n_rows(),
            self.g_ii.n_cols(),
            csr_entries(&self.g_ii),
        );
        section(
            "g_ib",
            self.g_ib.n_rows(),
            self.g_ib.n_cols(),
            csr_entries(&self.g_ib),
        );
        let n_b = self.g_bb.n_rows;
        section(
            "g_bb",
            n_b,
            n_b,
            (0..n_b)
                .flat_map(|r| (0..n_b).map(move |c| (r, c)))
                .map(|(r, c)| (r, c, self.g_bb[(r, c)]))
                .collect(),
        );
        section(
            "b_i",
            self.b_i.len(),
            1,
            self.b_i
                .iter()
                .enumerate()
                .map(|(r, &v)| (r, 0, v))
                .collect(),
        );
        section(
            "b_b",
            self.b_b.len(),
            1,
            self.b_b
                .iter()
                .enumerate()
                .map(|(r, &v)| (r, 0, v))
                .collect(),
        );
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dst {
    /// Interior pair: position and mirrored position in G_ii values.
    Ii(usize, usize),
    Ib(usize),
    /// Boundary pair: positions in G_bb data.
    Bb(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PairOp {
    p: u32,
    q: u32,
    dst: Dst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RhsDst {
    Interior(usize),
    Boundary(usize),
}

/// Symbolic patterns of G_ii and G_ib together with the per-row scatter
/// positions used by the fused path.
#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyPlan {
    pub n_interior: usize,
    pub n_boundary: usize,
    pub g_ii: CsrPattern,
    pub g_ib: CsrPattern,
    pair_ptr: Vec<usize>,
    pairs: Vec<PairOp>,
    rhs_ptr: Vec<usize>,
    rhs: Vec<(u32, RhsDst)>,
}

/// One-time symbolic analysis: every (slot_a, slot_b) pair of every row.
pub fn build_patterns(map: &AreaVariableMap, templates: &RowTemplates) -> AssemblyPlan {
    let (n_i, n_b) = (map.n_interior, map.n_boundary());
    let mut ii: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_i];
    let mut ib: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_i];
    let active = |r: usize| -> Vec<(u32, usize)> {
        templates
            .row_slots(r)
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != NO_SLOT)
            .map(|(p, &s)| (p as u32, s))
            .collect()
    };
    for r in 0..templates.len() {
        let slots = active(r);
        for &(_, a) in &slots {
            for &(_, b) in &slots {
                match (a < n_i, b < n_i) {
                    (true, true) => {
                        ii[a].insert(b);
                    }
                    (true, false) => {
                        ib[a].insert(b - n_i);
                    }
                    _ => {}
                }
            }
        }
    }
    // Unknowns touched by no row still get a diagonal slot so the pattern
    // reflects the full dimension; the factorization then reports them.
    for (a, row) in ii.iter_mut().enumerate() {
        row.insert(a);
    }
    let g_ii = CsrPattern::from_sets(n_i, &ii);
    let g_ib = CsrPattern::from_sets(n_b, &ib);

    let mut pair_ptr = vec![0];
    let mut pairs = Vec::new();
    let mut rhs_ptr = vec![0];
    let mut rhs = Vec::new();
    for r in 0..templates.len() {
        let slots = active(r);
        for (x, &(p, a)) in slots.iter().enumerate() {
            rhs.push((
                p,
                if a < n_i {
                    RhsDst::Interior(a)
                } else {
                    RhsDst::Boundary(a - n_i)
                },
            ));
            for &(q, b) in &slots[x..] {
                let dst = match (a < n_i, b < n_i) {
                    (true, true) => Dst::Ii(g_ii.find(a, b).unwrap(), g_ii.find(b, a).unwrap()),
                    (true, false) => Dst::Ib(g_ib.find(a, b - n_i).unwrap()),
                    (false, true) => Dst::Ib(g_ib.find(b, a - n_i).unwrap()),
                    (false, false) => {
                        Dst::Bb((a - n_i) * n_b + (b - n_i), (b - n_i) * n_b + (a - n_i))
                    }
                };
                pairs.push(PairOp { p, q, dst });
            }
        }
        pair_ptr.push(pairs.len());
        rhs_ptr.push(rhs.len());
    }

    AssemblyPlan {
        n_interior: n_i,
        n_boundary: n_b,
        g_ii,
        g_ib,
        pair_ptr,
        pairs,
        rhs_ptr,
        rhs,
    }
}

/// Fused accumulation of the area's normal-equation blocks at the local
/// voltages `va`, `vm` (indexed like `map.local_buses()`).
pub fn fused_accumulate(
    plan: &AssemblyPlan,
    templates: &RowTemplates,
    ms: &MeasurementSet,
    va: &[f64],
    vm: &[f64],
    mode: AccumulationMode,
) -> AreaNormalBlocks {
    match mode {
        AccumulationMode::Deterministic => {
            let mut blocks = AreaNormalBlocks::zeros(plan);
            accumulate_rows(plan, templates, ms, va, vm, 0..templates.len(), &mut blocks);
            blocks
        }
        AccumulationMode::Parallel => {
            let chunk = 256;
            let n_chunks = templates.len().div_ceil(chunk);
            (0..n_chunks)
                .into_par_iter()
                .map(|c| {
                    let mut blocks = AreaNormalBlocks::zeros(plan);
                    let rows = c * chunk..((c + 1) * chunk).min(templates.len());
                    accumulate_rows(plan, templates, ms, va, vm, rows, &mut blocks);
                    blocks
                })
                .reduce(
                    || AreaNormalBlocks::zeros(plan),
                    |mut a, b| {
                        a.add_assign(&b);
                        a
                    },
                )
        }
    }
}

fn accumulate_rows(
    plan: &AssemblyPlan,
    templates: &RowTemplates,
    ms: &MeasurementSet,
    va: &[f64],
    vm: &[f64],
    rows: std::ops::Range<usize>,
    blocks: &mut AreaNormalBlocks,
) {
    let mut work = RowWork::default();
    for r in rows {
        let row = templates.rows[r];
        let w = ms.effective_weight(row);
        if w == 0.0 {
            continue;
        }
        let h = templates.evaluate(r, va, vm, &mut work);
        let wr = w * (ms.z[row] - h);
        let g = &work.grad;
        for &(p, dst) in &plan.rhs[plan.rhs_ptr[r]..plan.rhs_ptr[r + 1]] {
            let v = wr * g[p as usize];
            match dst {
                RhsDst::Interior(s) => blocks.b_i[s] += v,
                RhsDst::Boundary(s) => blocks.b_b[s] += v,
            }
        }
        for op in &plan.pairs[plan.pair_ptr[r]..plan.pair_ptr[r + 1]] {
            let c = w * g[op.p as usize] * g[op.q as usize];
            match op.dst {
                Dst::Ii(a, b) => {
                    blocks.g_ii.values[a] += c;
                    if a != b {
                        blocks.g_ii.values[b] += c;
                    }
                }
                Dst::Ib(a) => blocks.g_ib.values[a] += c,
                Dst::Bb(a, b) => {
                    blocks.g_bb.data[a] += c;
                    if a != b {
                        blocks.g_bb.data[b] += c;
                    }
                }
            }
        }
    }
}

/// Materialized Jacobian of an area, H_k = [H_i H_b] in the combined slot
/// space.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianTriplets {
    pub n_rows: usize,
    pub n_cols: usize,
    pub triplets: Vec<(usize, usize, f64)>,
    pub weights: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Oracle path: build H as triplets, then G = HᵀWH and b = HᵀWr by sparse
/// products, split into blocks on the symbolic patterns.
pub fn explicit_assemble(
    plan: &AssemblyPlan,
    templates: &RowTemplates,
    ms: &MeasurementSet,
    va: &[f64],
    vm: &[f64],
) -> (JacobianTriplets, AreaNormalBlocks) {
    let (n_i, n_b) = (plan.n_interior, plan.n_boundary);
    let n = n_i + n_b;
    let mut work = RowWork::default();
    let mut jac = JacobianTriplets {
        n_rows: templates.len(),
        n_cols: n,
        triplets: Vec::new(),
        weights: Vec::with_capacity(templates.len()),
        residuals: Vec::with_capacity(templates.len()),
    };
    for r in 0..templates.len() {
        let row = templates.rows[r];
        let h = templates.evaluate(r, va, vm, &mut work);
        jac.weights.push(ms.effective_weight(row));
        jac.residuals.push(ms.z[row] - h);
        for (&s, &g) in templates.row_slots(r).iter().zip(&work.grad) {
            if s != NO_SLOT {
                jac.triplets.push((r, s, g));
            }
        }
    }

    // H in CSR, Hᵀ in CSR (= H in CSC).
    let h = triplets_to_csr(jac.n_rows, jac.triplets.iter().copied());
    let ht = triplets_to_csr(n, jac.triplets.iter().map(|&(r, c, v)| (c, r, v)));

    let mut g_full = vec![vec![]; n];
    let mut acc = vec![0.0; n];
    let mut touched = vec![false; n];
    let mut b = vec![0.0; n];
    for a in 0..n {
        let mut cols = Vec::new();
        for p in ht.0[a]..ht.0[a + 1] {
            let (r, h_ra) = (ht.1[p], ht.2[p]);
            let w = jac.weights[r];
            b[a] += h_ra * w * jac.residuals[r];
            for q in h.0[r]..h.0[r + 1] {
                let col = h.1[q];
                if !touched[col] {
                    touched[col] = true;
                    cols.push(col);
                }
                acc[col] += h_ra * w * h.2[q];
            }
        }
        cols.sort_unstable();
        g_full[a] = cols.iter().map(|&c| (c, acc[c])).collect();
        for &c in &cols {
            acc[c] = 0.0;
            touched[c] = false;
        }
    }

    let mut blocks = AreaNormalBlocks::zeros(plan);
    for (a, row) in g_full.iter().enumerate() {
        for &(c, v) in row {
            match (a < n_i, c < n_i) {
                (true, true) => {
                    let pos = plan
                        .g_ii
                        .find(a, c)
                        .expect("product entry inside the symbolic pattern");
                    blocks.g_ii.values[pos] = v;
                }
                (true, false) => {
                    let pos = plan
                        .g_ib
                        .find(a, c - n_i)
                        .expect("product entry inside the symbolic pattern");
                    blocks.g_ib.values[pos] = v;
                }
                (false, false) => blocks.g_bb[(a - n_i, c - n_i)] = v,
                (false, true) => {}
            }
        }
    }
    blocks.b_i.copy_from_slice(&b[..n_i]);
    blocks.b_b.copy_from_slice(&b[n_i..]);
    (jac, blocks)
}

type Csr = (Vec<usize>, Vec<usize>, Vec<f64>);

fn triplets_to_csr(
    n_rows: usize,
    entries: impl Iterator<Item = (usize, usize, f64)> + Clone,
) -> Csr {
    let mut ptr = vec![0usize; n_rows + 1];
    for (r, _, _) in entries.clone() {
        ptr[r + 1] += 1;
    }
    for r in 0..n_rows {
        ptr[r + 1] += ptr[r];
    }
    let mut next = ptr.clone();
    let nnz = ptr[n_rows];
    let mut idx = vec![0; nnz];
    let mut val = vec![0.0; nnz];
    // Stable in input order, which is ascending row-major for H.
    for (r, c, v) in entries {
        idx[next[r]] = c;
        val[next[r]] = v;
        next[r] += 1;
    }
    (ptr, idx, val)
}
