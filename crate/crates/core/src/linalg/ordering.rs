use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::CsrPattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    Natural,
    #[default]
    MinimumDegree,
}

/// Minimum-degree elimination order on the explicit elimination graph.
///
/// Ties go to the lowest index. Returns `perm` with `perm[k]` the variable
/// eliminated at step k.
pub fn minimum_degree(pattern: &CsrPattern) -> Vec<usize> {
    let n = pattern.n_rows;
    let mut adj: Vec<Vec<usize>> = (0..n)
        .map(|i| pattern.row(i).iter().copied().filter(|&j| j != i).collect())
        .collect();
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|i| Reverse((adj[i].len(), i))).collect();
    let mut perm = Vec::with_capacity(n);
    let mut merged = Vec::new();
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        perm.push(v);
        let nbrs = std::mem::take(&mut adj[v]);
        for &u in &nbrs {
            // adj[u] ← (adj[u] ∪ nbrs) \ {u, v}, kept sorted.
            merged.clear();
            let (a, b) = (&adj[u], &nbrs);
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                let next = match (a.get(i), b.get(j)) {
                    (Some(&x), Some(&y)) if x == y => {
                        i += 1;
                        j += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        i += 1;
                        x
                    }
                    (Some(_), Some(&y)) => {
                        j += 1;
                        y
                    }
                    (Some(&x), None) => {
                        i += 1;
                        x
                    }
                    (None, Some(&y)) => {
                        j += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                if next != u && next != v {
                    merged.push(next);
                }
            }
            std::mem::swap(&mut adj[u], &mut merged);
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    perm
}
