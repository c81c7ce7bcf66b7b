//! Seeded random meshed networks for tests and desk-scale experiments.
//!
//! Buses are scattered in the unit square; each new bus attaches to its
//! nearest placed bus (a spanning tree), then short extra chords are added
//! until the requested mesh density is reached. The ground-truth operating
//! point is a smooth angle field over the square with jittered magnitudes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Branch, Bus, BusBranchNetwork};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_bus: usize,
    pub seed: u64,
    /// Extra chords as a fraction of `n_bus - 1`.
    pub mesh_ratio: f64,
    /// Probability that a branch is a tap-changing transformer.
    pub transformer_ratio: f64,
}

impl SyntheticConfig {
    pub fn new(n_bus: usize, seed: u64) -> Self {
        SyntheticConfig {
            n_bus,
            seed,
            mesh_ratio: 0.45,
            transformer_ratio: 0.1,
        }
    }
}

pub fn random_network(cfg: &SyntheticConfig) -> Result<BusBranchNetwork> {
    let n = cfg.n_bus.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let points: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    let dist = |a: usize, b: usize| {
        let (dx, dy) = (points[a].0 - points[b].0, points[a].1 - points[b].1);
        (dx * dx + dy * dy).sqrt()
    };

    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 1..n {
        let nearest = (0..i)
            .min_by(|&a, &b| dist(i, a).total_cmp(&dist(i, b)))
            .expect("at least one placed bus");
        edges.push((nearest, i));
    }

    let extra = ((n.saturating_sub(1)) as f64 * cfg.mesh_ratio).round() as usize;
    if n > 2 {
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for a in 0..n {
            // Short chords only: the few nearest buses of each bus.
            let mut near: Vec<usize> = (0..n).filter(|&b| b != a).collect();
            near.sort_by(|&p, &q| dist(a, p).total_cmp(&dist(a, q)));
            for &b in near.iter().take(4) {
                if a < b {
                    candidates.push((dist(a, b), a, b));
                }
            }
        }
        candidates.sort_by(|p, q| p.0.total_cmp(&q.0));
        candidates.dedup_by(|p, q| p.1 == q.1 && p.2 == q.2);
        let mut has = std::collections::HashSet::new();
        for &(a, b) in &edges {
            has.insert((a.min(b), a.max(b)));
        }
        let mut added = 0;
        for (_, a, b) in candidates {
            if added >= extra {
                break;
            }
            if rng.random::<f64>() < 0.7 && has.insert((a, b)) {
                edges.push((a, b));
                added += 1;
            }
        }
    }

    let buses: Vec<Bus> = (0..n)
        .map(|i| {
            let (px, py) = points[i];
            let va = -0.35 * (px + 0.6 * py) + 0.02 * (rng.random::<f64>() - 0.5);
            Bus {
                id: i as i64 + 1,
                base_kv: 138.0,
                gs: 0.0,
                bs: if rng.random::<f64>() < 0.1 {
                    0.2 * rng.random::<f64>()
                } else {
                    0.0
                },
                is_slack: i == 0,
                vm_true: 0.96 + 0.1 * rng.random::<f64>(),
                va_true: va,
            }
        })
        .collect();
    let slack_va = buses[0].va_true;
    let buses = buses
        .into_iter()
        .map(|mut b| {
            b.va_true -= slack_va;
            b
        })
        .collect();

    let branches = edges
        .into_iter()
        .map(|(a, b)| {
            if rng.random::<f64>() < cfg.transformer_ratio {
                Branch {
                    from_bus: a,
                    to_bus: b,
                    r: 0.0,
                    x: 0.05 + 0.15 * rng.random::<f64>(),
                    b_charging: 0.0,
                    tap: 0.95 + 0.1 * rng.random::<f64>(),
                    shift: 0.0,
                    in_service: true,
                }
            } else {
                let r = 0.005 + 0.03 * rng.random::<f64>();
                Branch {
                    from_bus: a,
                    to_bus: b,
                    r,
                    x: r * (3.0 + 5.0 * rng.random::<f64>()),
                    b_charging: 0.05 * rng.random::<f64>(),
                    tap: 1.0,
                    shift: 0.0,
                    in_service: true,
                }
            }
        })
        .collect();

    BusBranchNetwork::new(100.0, buses, branches)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_meshed() {
        let cfg = SyntheticConfig::new(120, 3);
        let a = random_network(&cfg).unwrap();
        let b = random_network(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_bus(), 120);
        assert!(a.n_branch() > 119 + 30, "{} branches", a.n_branch());
    }
}
