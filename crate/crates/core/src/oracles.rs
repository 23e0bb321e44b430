//! Exhaustive references for small instances. They call the same objective
//! and constraint code as the heuristics, so a mismatch points at search
//! quality rather than at a formula.

use crate::beamhop::ConflictGraph;
use crate::error::{Error, Result};
use crate::handover::{Assignment, Candidates, DeltaPrime};
use crate::spectrum::SharingProblem;

pub const MAX_WMIS_VERTICES: usize = 20;
pub const MAX_BINARY_DIM: usize = 20;
pub const MAX_TOY_DIM: usize = 24;
pub const MAX_ASSIGNMENTS: usize = 1_000_000;

/// Maximum-weight independent set by depth-first enumeration, skipping
/// branches that would add a neighbour of a chosen vertex.
pub fn brute_force_wmis(graph: &ConflictGraph, weights: &[f64]) -> Result<(Vec<usize>, f64)> {
    let n = graph.vertex_count();
    if n > MAX_WMIS_VERTICES {
        return Err(Error::TooLarge(format!("{n} vertices exceeds {MAX_WMIS_VERTICES}")));
    }
    let masks: Vec<u32> = (0..n).map(|v| graph.neighbors(v).iter().fold(0u32, |m, &u| m | 1 << u)).collect();
    let mut best = (0u32, 0.0);
    fn walk(v: usize, chosen: u32, blocked: u32, weight: f64, masks: &[u32], w: &[f64], best: &mut (u32, f64)) {
        if v == masks.len() {
            if weight > best.1 {
                *best = (chosen, weight);
            }
            return;
        }
        if blocked & (1 << v) == 0 {
            walk(v + 1, chosen | 1 << v, blocked | masks[v], weight + w[v], masks, w, best);
        }
        walk(v + 1, chosen, blocked, weight, masks, w, best);
    }
    walk(0, 0, 0, 0.0, &masks, weights, &mut best);
    Ok(((0..n).filter(|v| best.0 & (1 << v) != 0).collect(), best.1))
}

/// A generic binary maximization problem for exhaustive search.
pub struct ToyInstance<'a> {
    pub dim: usize,
    pub objective: Box<dyn Fn(&[bool]) -> f64 + 'a>,
    pub feasible: Box<dyn Fn(&[bool]) -> bool + 'a>,
}

impl ToyInstance<'_> {
    /// Best feasible vector; ties keep the first in counting order.
    pub fn solve(&self) -> Result<Option<(Vec<bool>, f64)>> {
        if self.dim > MAX_TOY_DIM {
            return Err(Error::TooLarge(format!("dimension {} exceeds {MAX_TOY_DIM}", self.dim)));
        }
        let mut best: Option<(Vec<bool>, f64)> = None;
        let mut z = vec![false; self.dim];
        for code in 0u64..(1u64 << self.dim) {
            for (j, b) in z.iter_mut().enumerate() {
                *b = code >> j & 1 == 1;
            }
            if !(self.feasible)(&z) {
                continue;
            }
            let f = (self.objective)(&z);
            if best.as_ref().map_or(true, |(_, bf)| f > *bf) {
                best = Some((z.clone(), f));
            }
        }
        Ok(best)
    }
}

/// Exhaustive maximum of the sharing fitness over all 2^dim vectors.
pub fn brute_force_binary(problem: &SharingProblem) -> Result<(Vec<bool>, f64)> {
    if problem.dim() > MAX_BINARY_DIM {
        return Err(Error::TooLarge(format!("dimension {} exceeds {MAX_BINARY_DIM}", problem.dim())));
    }
    let toy =
        ToyInstance { dim: problem.dim(), objective: Box::new(|z| problem.fitness(z)), feasible: Box::new(|_| true) };
    Ok(toy.solve()?.expect("every vector has a fitness"))
}

/// Exact minimum of δ′ over all candidate-feasible assignments.
pub fn brute_force_assignment(candidates: &Candidates, objective: &DeltaPrime<'_>) -> Result<(Assignment, f64)> {
    let cells = candidates.cell_count();
    let mut total: usize = 1;
    for c in 0..cells {
        let k = candidates.of_cell(c).len();
        if k == 0 {
            return Err(Error::Infeasible { epoch: 0, cell: c });
        }
        total = total.saturating_mul(k);
    }
    if total > MAX_ASSIGNMENTS {
        return Err(Error::TooLarge(format!("{total} assignments exceed {MAX_ASSIGNMENTS}")));
    }
    let mut digits = vec![0usize; cells];
    let mut serving: Vec<usize> = (0..cells).map(|c| candidates.of_cell(c)[0]).collect();
    let mut best = (serving.clone(), objective.eval(&serving));
    for _ in 1..total {
        for c in 0..cells {
            digits[c] += 1;
            if digits[c] < candidates.of_cell(c).len() {
                serving[c] = candidates.of_cell(c)[digits[c]];
                break;
            }
            digits[c] = 0;
            serving[c] = candidates.of_cell(c)[0];
        }
        let v = objective.eval(&serving);
        if v < best.1 {
            best = (serving.clone(), v);
        }
    }
    Ok((Assignment { serving: best.0 }, best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::ShareVar;

    #[test]
    fn wmis_examples() {
        let edgeless = ConflictGraph::from_edges(3, &[]);
        assert_eq!(brute_force_wmis(&edgeless, &[1.0, 2.0, 3.0]).unwrap(), (vec![0, 1, 2], 6.0));
        let triangle = ConflictGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(brute_force_wmis(&triangle, &[5.0, 1.0, 1.0]).unwrap(), (vec![0], 5.0));
        let path = ConflictGraph::from_edges(3, &[(0, 1), (1, 2)]);
        assert_eq!(brute_force_wmis(&path, &[3.0, 1.0, 3.0]).unwrap(), (vec![0, 2], 6.0));
        let big = ConflictGraph::from_edges(21, &[]);
        assert!(matches!(brute_force_wmis(&big, &[1.0; 21]), Err(Error::TooLarge(_))));
    }

    fn one_var(budget: usize) -> SharingProblem {
        SharingProblem {
            vars: vec![ShareVar { slot: 0, sat: 0, cell: 0 }],
            residual: vec![4.0],
            rate: vec![1.0],
            slots: 1,
            clusters: 1,
            budgets: vec![budget],
            inr_threshold: 0.5,
            inr: vec![1.0],
        }
    }

    #[test]
    fn binary_examples() {
        let empty = SharingProblem {
            vars: vec![],
            residual: vec![],
            rate: vec![],
            slots: 1,
            clusters: 0,
            budgets: vec![],
            inr_threshold: 0.0,
            inr: vec![],
        };
        assert_eq!(brute_force_binary(&empty).unwrap().0, Vec::<bool>::new());
        assert_eq!(brute_force_binary(&one_var(1)).unwrap().0, vec![true]);
        assert_eq!(brute_force_binary(&one_var(0)).unwrap().0, vec![false]);
    }

    #[test]
    fn assignment_examples() {
        let sats = [0, 1];
        let q = [1.0, 1.0];
        let m = [0.0, 0.0];
        let prev = [None, None];
        let d = DeltaPrime {
            satellites: &sats,
            queue: &q,
            virtual_queue: &m,
            previous: &prev,
            h_bar: 0.004,
            load_weight: 1.0,
        };
        let (a, v) = brute_force_assignment(&Candidates::new(vec![vec![0, 1], vec![0, 1]]), &d).unwrap();
        assert_eq!(v, 0.0);
        assert_ne!(a.serving[0], a.serving[1]);
        let (forced, _) = brute_force_assignment(&Candidates::new(vec![vec![1], vec![1]]), &d).unwrap();
        assert_eq!(forced.serving, vec![1, 1]);
        assert!(matches!(
            brute_force_assignment(&Candidates::new(vec![vec![0], vec![]]), &d),
            Err(Error::Infeasible { cell: 1, .. })
        ));
    }
}
