//! Per-epoch conflict graph and greedy weighted independent-set beam hopping.
//!
//! Vertex `c·B + b` stands for "cell `c` lit by beam `b` of its serving
//! satellite". Edges join vertices that may not share a slot: two beams on
//! one cell, one beam on two cells, or a co-polarized pair in K_f.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linkbudget::{BeamLink, ConflictSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictGraph {
    pub beams: usize,
    /// Serving satellite per cell.
    pub serving: Vec<usize>,
    adjacency: Vec<Vec<usize>>,
}

impl ConflictGraph {
    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn cell_of(&self, v: usize) -> usize {
        v / self.beams
    }

    pub fn beam_of(&self, v: usize) -> usize {
        v % self.beams
    }

    pub fn link_of(&self, v: usize) -> BeamLink {
        let cell = self.cell_of(v);
        BeamLink { sat: self.serving[cell], cell, beam: self.beam_of(v) }
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Graph over arbitrary vertices with explicit edges; each vertex is its
    /// own cell with one beam. Used for oracle comparisons.
    pub fn from_edges(vertices: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![Vec::new(); vertices];
        for &(a, b) in edges {
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Self { beams: 1, serving: (0..vertices).collect(), adjacency }
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        set.iter().enumerate().all(|(i, &a)| set[i + 1..].iter().all(|&b| a != b && !self.adjacent(a, b)))
    }
}

/// Builds the epoch's conflict graph. `polarization` maps a beam index to
/// its polarization configuration.
pub fn build_conflict_graph(
    serving: &[usize],
    conflicts: &ConflictSet,
    beams: usize,
    polarization: impl Fn(usize) -> usize,
) -> ConflictGraph {
    let cells = serving.len();
    let mut adjacency = vec![Vec::new(); cells * beams];
    let mut link = |a: usize, b: usize| {
        adjacency[a].push(b);
        adjacency[b].push(a);
    };
    for c1 in 0..cells {
        for b1 in 0..beams {
            for b2 in (b1 + 1)..beams {
                link(c1 * beams + b1, c1 * beams + b2);
            }
        }
        for c2 in (c1 + 1)..cells {
            let same_sat = serving[c1] == serving[c2];
            let interfering = conflicts.contains(c1, c2);
            for b1 in 0..beams {
                for b2 in 0..beams {
                    if (same_sat && b1 == b2) || (interfering && polarization(b1) == polarization(b2)) {
                        link(c1 * beams + b1, c2 * beams + b2);
                    }
                }
            }
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
        list.dedup();
    }
    ConflictGraph { beams, serving: serving.to_vec(), adjacency }
}

/// `R² + Q² − (D − Q)²`; with `D = R` this is `2RQ`.
pub fn vertex_weight(queue: f64, rate: f64, served: f64) -> f64 {
    rate * rate + queue * queue - (served - queue).powi(2)
}

/// `w_v / (w_v + Σ w` over accessible neighbours`)`.
pub fn weight_ratio(graph: &ConflictGraph, v: usize, weights: &[f64], accessible: &[bool]) -> f64 {
    let around: f64 = graph.neighbors(v).iter().filter(|&&u| accessible[u]).map(|&u| weights[u]).sum();
    weights[v] / (weights[v] + around)
}

/// Visiting order of the greedy slot scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopOrder {
    /// Descending weight ratio, then weight, then lower vertex id.
    WeightRatio,
    /// Descending queue length, then lower vertex id.
    Queue,
}

/// Greedy independent set for one slot. Serves every selected cell
/// `min(R, Q)` bits and returns the selected vertices in visiting order.
pub fn schedule_slot(graph: &ConflictGraph, queue: &mut [f64], rate: &[f64], order: HopOrder) -> Vec<usize> {
    let n = graph.vertex_count();
    let mut accessible: Vec<bool> = (0..n).map(|v| queue[graph.cell_of(v)] > 0.0).collect();
    let weights: Vec<f64> = (0..n)
        .map(|v| {
            let c = graph.cell_of(v);
            if accessible[v] {
                vertex_weight(queue[c], rate[c], rate[c])
            } else {
                0.0
            }
        })
        .collect();
    let mut visit: Vec<usize> = (0..n).filter(|&v| accessible[v]).collect();
    match order {
        HopOrder::WeightRatio => {
            let ratio: Vec<f64> = (0..n)
                .map(|v| if accessible[v] { weight_ratio(graph, v, &weights, &accessible) } else { 0.0 })
                .collect();
            visit.sort_by(|&a, &b| {
                ratio[b]
                    .partial_cmp(&ratio[a])
                    .unwrap_or(Ordering::Equal)
                    .then(weights[b].partial_cmp(&weights[a]).unwrap_or(Ordering::Equal))
                    .then(a.cmp(&b))
            });
        }
        HopOrder::Queue => visit.sort_by(|&a, &b| {
            let (qa, qb) = (queue[graph.cell_of(a)], queue[graph.cell_of(b)]);
            qb.partial_cmp(&qa).unwrap_or(Ordering::Equal).then(a.cmp(&b))
        }),
    }
    let mut selected = Vec::new();
    for v in visit {
        if !accessible[v] {
            continue;
        }
        selected.push(v);
        accessible[v] = false;
        for &u in graph.neighbors(v) {
            accessible[u] = false;
        }
        let c = graph.cell_of(v);
        queue[c] = (queue[c] - rate[c]).max(0.0);
    }
    selected
}

/// Beam activity of one epoch: the lit beams of every slot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSchedule {
    pub slots: Vec<Vec<BeamLink>>,
}

impl SlotSchedule {
    pub fn busy_beam_slots(&self) -> usize {
        self.slots.iter().map(Vec::len).sum()
    }

    /// Slots in which each cell is lit.
    pub fn lit_slots(&self, cells: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); cells];
        for (t, slot) in self.slots.iter().enumerate() {
            for link in slot {
                out[link.cell].push(t);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamHopResult {
    pub schedule: SlotSchedule,
    /// Bits delivered over the satellite band per cell.
    pub served: Vec<f64>,
    /// Queue left after beam hopping, Q′.
    pub residual: Vec<f64>,
    /// Queue at the start of every slot, `slot_queues[t][c]`.
    pub slot_queues: Vec<Vec<f64>>,
}

/// Runs the greedy scheduler over `slots` slots.
pub fn beamhop_epoch(
    graph: &ConflictGraph,
    queue: &[f64],
    rate: &[f64],
    slots: usize,
    order: HopOrder,
) -> BeamHopResult {
    let mut q = queue.to_vec();
    let mut schedule = SlotSchedule { slots: Vec::with_capacity(slots) };
    let mut slot_queues = Vec::with_capacity(slots);
    for _ in 0..slots {
        slot_queues.push(q.clone());
        let chosen = schedule_slot(graph, &mut q, rate, order);
        let mut links: Vec<BeamLink> = chosen.into_iter().map(|v| graph.link_of(v)).collect();
        links.sort_unstable();
        schedule.slots.push(links);
    }
    let served = queue.iter().zip(&q).map(|(a, b)| a - b).collect();
    BeamHopResult { schedule, served, residual: q, slot_queues }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub epoch: u64,
    pub slot: usize,
    pub satellite: usize,
    pub beam: usize,
    pub cell: usize,
}

/// Appends an epoch's schedule as CSV rows `(epoch, slot, satellite, beam, cell)`.
pub fn write_schedule_csv<W: Write>(writer: &mut csv::Writer<W>, epoch: u64, schedule: &SlotSchedule) -> Result<()> {
    for (slot, links) in schedule.slots.iter().enumerate() {
        for l in links {
            writer.serialize(ScheduleRecord { epoch, slot, satellite: l.sat, beam: l.beam, cell: l.cell })?;
        }
    }
    Ok(())
}
