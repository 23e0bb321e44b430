//! Random instance builders shared by the integration tests.
#![allow(dead_code)]

use leobeam::beamhop::ConflictGraph;
use leobeam::spectrum::{ShareVar, SharingProblem};
use rand::Rng;

/// Random simple graph on `n` vertices with edge probability `density`.
pub fn random_graph<R: Rng>(n: usize, density: f64, rng: &mut R) -> ConflictGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen::<f64>() < density {
                edges.push((a, b));
            }
        }
    }
    ConflictGraph::from_edges(n, &edges)
}

/// Random sharing instance with `dim` variables spread over a few slots,
/// `cells` cells and `clusters` clusters. INR values straddle the
/// threshold so budgets actually bind.
pub fn random_sharing_problem<R: Rng>(dim: usize, cells: usize, clusters: usize, rng: &mut R) -> SharingProblem {
    let slots = 6;
    let mut vars: Vec<ShareVar> = Vec::new();
    while vars.len() < dim {
        let v = ShareVar { slot: rng.gen_range(0..slots), sat: rng.gen_range(0..2), cell: rng.gen_range(0..cells) };
        if !vars.contains(&v) && !vars.iter().any(|w| w.slot == v.slot && w.cell == v.cell) {
            vars.push(v);
        }
    }
    vars.sort_unstable();
    let rate: Vec<f64> = (0..cells).map(|_| rng.gen_range(1.0..4.0)).collect();
    let residual: Vec<f64> = (0..cells).map(|c| rate[c] * rng.gen_range(0.0..4.0)).collect();
    let inr = (0..dim * clusters).map(|_| rng.gen_range(0.0..0.15)).collect();
    let budgets = (0..clusters).map(|_| rng.gen_range(0..=3)).collect();
    SharingProblem { vars, residual, rate, slots, clusters, budgets, inr_threshold: 0.1, inr }
}
