//! Conditional handover triggering and the serving-satellite decision:
//! keep serving satellites that remain usable, give orphaned cells a
//! satellite through entropy-weighted multi-attribute scoring, then (when
//! triggered) rebalance with two-kind swap matching on δ′.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::{handover_increment, virtual_arrival};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttributeWeights {
    Entropy,
    Fixed { load: f64, remaining: f64, elevation: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandoverConfig {
    pub sigma0: f64,
    pub tau0: f64,
    #[serde(rename = "N_prime")]
    pub n_prime: usize,
    pub perturb_fraction: f64,
    pub attribute_weights: AttributeWeights,
}

impl Default for HandoverConfig {
    fn default() -> Self {
        Self {
            sigma0: 0.9,
            tau0: 2.0,
            n_prime: 50,
            perturb_fraction: 0.1,
            attribute_weights: AttributeWeights::Entropy,
        }
    }
}

impl HandoverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sigma0) {
            return Err(Error::Config("sigma0 must lie in [0, 1]".into()));
        }
        if !(self.tau0 >= 1.0) {
            return Err(Error::Config("tau0 must be at least 1".into()));
        }
        if self.n_prime < 1 {
            return Err(Error::Config("N_prime must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.perturb_fraction) {
            return Err(Error::Config("perturb_fraction must lie in [0, 1]".into()));
        }
        if let AttributeWeights::Fixed { load, remaining, elevation } = self.attribute_weights {
            if [load, remaining, elevation].iter().any(|w| !(*w >= 0.0)) || load + remaining + elevation <= 0.0 {
                return Err(Error::Config("fixed attribute weights must be non-negative, not all zero".into()));
            }
        }
        Ok(())
    }
}

/// Satellites each cell may be served by this epoch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidates {
    per_cell: Vec<Vec<usize>>,
    satellites: Vec<usize>,
}

impl Candidates {
    pub fn new(mut per_cell: Vec<Vec<usize>>) -> Self {
        for list in &mut per_cell {
            list.sort_unstable();
            list.dedup();
        }
        let mut satellites: Vec<usize> = per_cell.iter().flatten().copied().collect();
        satellites.sort_unstable();
        satellites.dedup();
        Self { per_cell, satellites }
    }

    pub fn cell_count(&self) -> usize {
        self.per_cell.len()
    }

    pub fn of_cell(&self, cell: usize) -> &[usize] {
        &self.per_cell[cell]
    }

    pub fn allows(&self, cell: usize, sat: usize) -> bool {
        self.per_cell[cell].binary_search(&sat).is_ok()
    }

    /// Union of all candidate lists, ascending.
    pub fn satellites(&self) -> &[usize] {
        &self.satellites
    }
}

/// Serving satellite of every cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub serving: Vec<usize>,
}

impl Assignment {
    pub fn cells_of(&self, sat: usize) -> impl Iterator<Item = usize> + '_ {
        self.serving.iter().enumerate().filter(move |(_, &s)| s == sat).map(|(c, _)| c)
    }

    pub fn is_feasible(&self, candidates: &Candidates) -> bool {
        self.serving.len() == candidates.cell_count()
            && self.serving.iter().enumerate().all(|(c, &s)| candidates.allows(c, s))
    }
}

/// Busy beam-slots over the beam-slots of satellites serving at least one cell.
pub fn utilization_rate(busy_beam_slots: usize, active_satellites: usize, beams: usize, slots: usize) -> f64 {
    let capacity = active_satellites * beams * slots;
    if capacity == 0 {
        0.0
    } else {
        busy_beam_slots as f64 / capacity as f64
    }
}

/// Max over min queued load among satellites serving at least one cell;
/// `+∞` when the minimum is zero.
pub fn imbalance_index(loads: &[f64]) -> f64 {
    let max = loads.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = loads.iter().copied().fold(f64::INFINITY, f64::min);
    if loads.is_empty() || min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trigger {
    pub mandatory: Vec<usize>,
    pub global_rebalance: bool,
}

/// Cells whose previous serving satellite is no longer a candidate must be
/// reassigned; a global rebalance is due when utilization and imbalance are
/// both below their thresholds.
pub fn should_trigger(
    previous: &[Option<usize>],
    candidates: &Candidates,
    sigma: f64,
    tau: f64,
    cfg: &HandoverConfig,
) -> Trigger {
    let mandatory = previous
        .iter()
        .enumerate()
        .filter(|(c, p)| !p.is_some_and(|s| candidates.allows(*c, s)))
        .map(|(c, _)| c)
        .collect();
    Trigger { mandatory, global_rebalance: sigma < cfg.sigma0 && tau < cfg.tau0 }
}

/// Per-(satellite, cell) attributes other than load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkAttributes {
    pub remaining_s: f64,
    pub elevation_rad: f64,
}

/// Entropy weights of the columns of a benefit matrix (rows = candidates).
/// Returns min-max normalized columns alongside the weights.
pub fn entropy_weights(columns: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let normalized: Vec<Vec<f64>> = columns
        .iter()
        .map(|col| {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                col.iter().map(|v| (v - lo) / (hi - lo)).collect()
            } else {
                vec![0.0; col.len()]
            }
        })
        .collect();
    let divergence: Vec<f64> = normalized
        .iter()
        .map(|col| {
            let n = col.len();
            let total: f64 = col.iter().sum();
            if n < 2 || total <= 0.0 {
                return 0.0;
            }
            let entropy = -col
                .iter()
                .filter(|&&v| v > 0.0)
                .map(|v| {
                    let p = v / total;
                    p * p.ln()
                })
                .sum::<f64>()
                / (n as f64).ln();
            (1.0 - entropy).max(0.0)
        })
        .collect();
    let sum: f64 = divergence.iter().sum();
    let weights = if sum > 0.0 {
        divergence.iter().map(|d| d / sum).collect()
    } else {
        vec![1.0 / columns.len() as f64; columns.len()]
    };
    (normalized, weights)
}

/// Assigns each listed cell, in order, the candidate satellite with the best
/// multi-attribute score, adding the cell's queue to that satellite's load
/// before scoring the next cell.
pub fn entropy_assign(
    cells: &[usize],
    candidates: &Candidates,
    queue: &[f64],
    loads: &mut std::collections::BTreeMap<usize, f64>,
    attributes: &dyn Fn(usize, usize) -> LinkAttributes,
    mode: AttributeWeights,
) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::with_capacity(cells.len());
    for &cell in cells {
        let options = candidates.of_cell(cell);
        let chosen = match options {
            [] => return Err(Error::Infeasible { epoch: 0, cell }),
            [only] => *only,
            _ => {
                let load_col: Vec<f64> =
                    options.iter().map(|s| 1.0 / (1.0 + loads.get(s).copied().unwrap_or(0.0))).collect();
                let attrs: Vec<LinkAttributes> = options.iter().map(|&s| attributes(s, cell)).collect();
                let columns = vec![
                    load_col,
                    attrs.iter().map(|a| a.remaining_s).collect(),
                    attrs.iter().map(|a| a.elevation_rad).collect(),
                ];
                let (normalized, entropy) = entropy_weights(&columns);
                let weights = match mode {
                    AttributeWeights::Entropy => entropy,
                    AttributeWeights::Fixed { load, remaining, elevation } => {
                        let t = load + remaining + elevation;
                        vec![load / t, remaining / t, elevation / t]
                    }
                };
                let mut best = (f64::NEG_INFINITY, usize::MAX);
                for (i, &s) in options.iter().enumerate() {
                    let score: f64 = (0..3).map(|a| weights[a] * normalized[a][i]).sum();
                    // Candidates are ascending, so strict improvement keeps the lowest id on ties.
                    if score > best.0 {
                        best = (score, s);
                    }
                }
                best.1
            }
        };
        *loads.entry(chosen).or_insert(0.0) += queue[cell];
        out.push((cell, chosen));
    }
    Ok(out)
}

/// Candidate with the smallest load, ties to the lowest id.
pub fn assign_min_load(
    cells: &[usize],
    candidates: &Candidates,
    queue: &[f64],
    loads: &mut std::collections::BTreeMap<usize, f64>,
) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::with_capacity(cells.len());
    for &cell in cells {
        let mut best: Option<(f64, usize)> = None;
        for &s in candidates.of_cell(cell) {
            let load = loads.get(&s).copied().unwrap_or(0.0);
            if best.map_or(true, |(l, _)| load < l) {
                best = Some((load, s));
            }
        }
        let (_, sat) = best.ok_or(Error::Infeasible { epoch: 0, cell })?;
        *loads.entry(sat).or_insert(0.0) += queue[cell];
        out.push((cell, sat));
    }
    Ok(out)
}

/// The handover objective δ′ for fixed queues and previous assignment.
/// `load_weight` scales the load-balance term (1 gives the bare formula).
#[derive(Debug, Clone)]
pub struct DeltaPrime<'a> {
    pub satellites: &'a [usize],
    pub queue: &'a [f64],
    pub virtual_queue: &'a [f64],
    pub previous: &'a [Option<usize>],
    pub h_bar: f64,
    pub load_weight: f64,
}

impl DeltaPrime<'_> {
    pub fn load_term(&self, serving: &[usize]) -> f64 {
        let total: f64 = self.queue.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        self.satellites
            .iter()
            .map(|&s| {
                let signed: f64 =
                    serving.iter().zip(self.queue).map(|(&sc, q)| if sc == s { 0.5 * q } else { -0.5 * q }).sum();
                (signed / total).powi(2)
            })
            .sum()
    }

    pub fn drift_term(&self, serving: &[usize]) -> f64 {
        serving
            .iter()
            .zip(self.previous)
            .zip(self.virtual_queue)
            .map(|((&s, &p), m)| m * virtual_arrival(handover_increment(p, s), self.h_bar))
            .sum()
    }

    pub fn eval(&self, serving: &[usize]) -> f64 {
        self.load_weight * self.load_term(serving) + self.drift_term(serving)
    }
}

/// Result of swap matching.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapOutcome {
    pub assignment: Assignment,
    pub iterations: usize,
    /// δ′ after every accepted swap, starting with the initial value.
    pub trajectory: Vec<f64>,
}

/// Two-kind swap matching with lexicographic scan and first-improvement
/// acceptance. Stops after a pass without improvement or `max_iterations`.
pub fn swap_matching(
    initial: Assignment,
    candidates: &Candidates,
    objective: &DeltaPrime<'_>,
    max_iterations: usize,
) -> SwapOutcome {
    let mut serving = initial.serving;
    let mut current = objective.eval(&serving);
    let mut trajectory = vec![current];
    let cells = serving.len();
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let mut improved = false;
        for c1 in 0..cells {
            for c2 in 0..cells {
                let (s1, s2) = (serving[c1], serving[c2]);
                if s1 == s2 || !candidates.allows(c1, s2) || !candidates.allows(c2, s1) {
                    continue;
                }
                serving[c1] = s2;
                serving[c2] = s1;
                let value = objective.eval(&serving);
                if value < current {
                    current = value;
                    trajectory.push(value);
                    improved = true;
                } else {
                    serving[c1] = s1;
                    serving[c2] = s2;
                }
            }
        }
        for c in 0..cells {
            for &s in candidates.satellites() {
                let old = serving[c];
                if s == old || !candidates.allows(c, s) {
                    continue;
                }
                serving[c] = s;
                let value = objective.eval(&serving);
                if value < current {
                    current = value;
                    trajectory.push(value);
                    improved = true;
                } else {
                    serving[c] = old;
                }
            }
        }
        if !improved {
            break;
        }
    }
    SwapOutcome { assignment: Assignment { serving }, iterations, trajectory }
}

/// Moves `⌈fraction·C⌉` random cells to random candidate satellites.
pub fn perturb<R: Rng>(assignment: &mut Assignment, candidates: &Candidates, fraction: f64, rng: &mut R) {
    let cells = assignment.serving.len();
    let count = ((fraction * cells as f64).ceil() as usize).min(cells);
    for cell in sample(rng, cells, count).into_iter() {
        let options = candidates.of_cell(cell);
        if !options.is_empty() {
            assignment.serving[cell] = options[rng.gen_range(0..options.len())];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandoverReason {
    Visibility,
    Rebalance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandoverEvent {
    pub epoch: u64,
    pub cell: usize,
    pub from_sat: usize,
    pub to_sat: usize,
    pub reason: HandoverReason,
}

/// How cells without a usable satellite are (re)assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandoverPolicy {
    /// Entropy assignment followed by triggered swap matching.
    Proposed,
    /// Entropy assignment on topology changes only.
    EntropyOnly,
    /// Minimum-load satellite on topology changes only.
    LoadBalance,
}

/// Everything the per-epoch decision reads.
pub struct HandoverInput<'a> {
    pub epoch: u64,
    pub previous: &'a [Option<usize>],
    pub candidates: &'a Candidates,
    pub queue: &'a [f64],
    pub virtual_queue: &'a [f64],
    pub h_bar: f64,
    pub load_weight: f64,
    /// Utilization and imbalance measured on the previous epoch.
    pub sigma: f64,
    pub tau: f64,
    pub attributes: &'a dyn Fn(usize, usize) -> LinkAttributes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandoverOutcome {
    pub assignment: Assignment,
    pub mandatory: Vec<usize>,
    pub rebalanced: bool,
    pub events: Vec<HandoverEvent>,
    pub swap_iterations: usize,
    pub delta_trajectory: Vec<f64>,
}

/// One epoch of the serving-satellite decision.
pub fn decide<R: Rng>(
    input: &HandoverInput<'_>,
    cfg: &HandoverConfig,
    policy: HandoverPolicy,
    rng: &mut R,
) -> Result<HandoverOutcome> {
    let cells = input.candidates.cell_count();
    let trigger = should_trigger(input.previous, input.candidates, input.sigma, input.tau, cfg);
    let mut serving: Vec<Option<usize>> =
        (0..cells).map(|c| input.previous[c].filter(|&s| input.candidates.allows(c, s))).collect();
    let mut loads = std::collections::BTreeMap::new();
    for (c, s) in serving.iter().enumerate() {
        if let Some(s) = s {
            *loads.entry(*s).or_insert(0.0) += input.queue[c];
        }
    }
    let assigned = match policy {
        HandoverPolicy::LoadBalance => assign_min_load(&trigger.mandatory, input.candidates, input.queue, &mut loads),
        _ => entropy_assign(
            &trigger.mandatory,
            input.candidates,
            input.queue,
            &mut loads,
            input.attributes,
            cfg.attribute_weights,
        ),
    }
    .map_err(|e| match e {
        Error::Infeasible { cell, .. } => Error::Infeasible { epoch: input.epoch, cell },
        other => other,
    })?;
    for (c, s) in assigned {
        serving[c] = Some(s);
    }
    let mut assignment = Assignment { serving: serving.into_iter().map(|s| s.expect("every cell assigned")).collect() };

    // Any fresh assignment resets σ and τ to zero, which always triggers.
    let rebalance = policy == HandoverPolicy::Proposed && (!trigger.mandatory.is_empty() || trigger.global_rebalance);
    let mut swap_iterations = 0;
    let mut delta_trajectory = Vec::new();
    if rebalance {
        perturb(&mut assignment, input.candidates, cfg.perturb_fraction, rng);
        let objective = DeltaPrime {
            satellites: input.candidates.satellites(),
            queue: input.queue,
            virtual_queue: input.virtual_queue,
            previous: input.previous,
            h_bar: input.h_bar,
            load_weight: input.load_weight,
        };
        let outcome = swap_matching(assignment, input.candidates, &objective, cfg.n_prime);
        assignment = outcome.assignment;
        swap_iterations = outcome.iterations;
        delta_trajectory = outcome.trajectory;
    }

    let events = (0..cells)
        .filter_map(|c| {
            let from = input.previous[c]?;
            let to = assignment.serving[c];
            (from != to).then(|| HandoverEvent {
                epoch: input.epoch,
                cell: c,
                from_sat: from,
                to_sat: to,
                reason: if trigger.mandatory.contains(&c) {
                    HandoverReason::Visibility
                } else {
                    HandoverReason::Rebalance
                },
            })
        })
        .collect();
    Ok(HandoverOutcome {
        assignment,
        mandatory: trigger.mandatory,
        rebalanced: rebalance,
        events,
        swap_iterations,
        delta_trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn flat(_: usize, _: usize) -> LinkAttributes {
        LinkAttributes { remaining_s: 100.0, elevation_rad: 1.0 }
    }

    #[test]
    fn utilization_examples() {
        assert_eq!(utilization_rate(1600, 2, 4, 200), 1.0);
        assert_eq!(utilization_rate(0, 2, 4, 200), 0.0);
        assert_eq!(utilization_rate(800, 2, 4, 200), 0.5);
        assert_eq!(utilization_rate(0, 0, 4, 200), 0.0);
    }

    #[test]
    fn imbalance_examples() {
        assert_eq!(imbalance_index(&[4e6, 2e6]), 2.0);
        assert_eq!(imbalance_index(&[3.0, 3.0]), 1.0);
        assert_eq!(imbalance_index(&[5.0, 0.0]), f64::INFINITY);
    }

    #[test]
    fn trigger_examples() {
        let cfg = HandoverConfig::default();
        let cand = Candidates::new(vec![vec![0, 1]; 10]);
        let prev = vec![Some(0); 10];
        assert_eq!(
            should_trigger(&prev, &cand, 0.95, 3.0, &cfg),
            Trigger { mandatory: vec![], global_rebalance: false }
        );
        assert_eq!(should_trigger(&prev, &cand, 0.5, 1.5, &cfg), Trigger { mandatory: vec![], global_rebalance: true });
        let mut lists = vec![vec![0, 1]; 10];
        lists[7] = vec![1];
        let t = should_trigger(&prev, &Candidates::new(lists), 0.95, 3.0, &cfg);
        assert_eq!(t.mandatory, vec![7]);
        assert!(!t.global_rebalance);
    }

    #[test]
    fn entropy_assign_examples() {
        let q = [1.0, 1.0];
        let mut loads = BTreeMap::new();
        let single = Candidates::new(vec![vec![5], vec![5]]);
        assert_eq!(
            entropy_assign(&[0], &single, &q, &mut loads, &flat, AttributeWeights::Entropy).unwrap(),
            vec![(0, 5)]
        );
        let mut loads = BTreeMap::new();
        let tie = Candidates::new(vec![vec![3, 1], vec![1, 3]]);
        assert_eq!(entropy_assign(&[0], &tie, &q, &mut loads, &flat, AttributeWeights::Entropy).unwrap(), vec![(0, 1)]);
        // After the first cell loads satellite 1, the load attribute favors 3.
        let out = entropy_assign(&[1], &tie, &q, &mut loads, &flat, AttributeWeights::Entropy).unwrap();
        assert_eq!(out, vec![(1, 3)]);
        let empty = Candidates::new(vec![vec![]]);
        assert!(matches!(
            entropy_assign(&[0], &empty, &q, &mut BTreeMap::new(), &flat, AttributeWeights::Entropy),
            Err(Error::Infeasible { cell: 0, .. })
        ));
    }

    #[test]
    fn constant_column_gets_zero_weight() {
        let (_, w) = entropy_weights(&[vec![0.2, 0.2, 0.2], vec![1.0, 2.0, 4.0], vec![0.0, 1.0, 0.0]]);
        assert_eq!(w[0], 0.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (_, uniform) = entropy_weights(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
        assert_eq!(uniform, vec![0.5, 0.5]);
    }

    #[test]
    fn entropy_weight_matches_hand_computation() {
        // Normalized column [0, 0.5, 1]: p = [0, 1/3, 2/3], e = −Σp ln p / ln 3.
        let e = -((1.0f64 / 3.0) * (1.0f64 / 3.0).ln() + (2.0f64 / 3.0) * (2.0f64 / 3.0).ln()) / 3f64.ln();
        // Normalized column [0, 1, 0]: p = [0, 1, 0], e = 0.
        let (norm, w) = entropy_weights(&[vec![1.0, 2.0, 3.0], vec![5.0, 9.0, 5.0]]);
        assert_eq!(norm[0], vec![0.0, 0.5, 1.0]);
        let d = [1.0 - e, 1.0];
        assert!((w[0] - d[0] / (d[0] + d[1])).abs() < 1e-12);
        assert!((w[1] - d[1] / (d[0] + d[1])).abs() < 1e-12);
    }

    fn objective<'a>(sats: &'a [usize], q: &'a [f64], m: &'a [f64], prev: &'a [Option<usize>]) -> DeltaPrime<'a> {
        DeltaPrime { satellites: sats, queue: q, virtual_queue: m, previous: prev, h_bar: 0.004, load_weight: 1.0 }
    }

    #[test]
    fn delta_prime_examples() {
        let sats = [0, 1];
        let q = [1.0, 1.0];
        let m = [0.0, 0.0];
        let prev = [None, None];
        let d = objective(&sats, &q, &m, &prev);
        assert!((d.eval(&[0, 0]) - 0.5).abs() < 1e-15);
        assert_eq!(d.eval(&[0, 1]), 0.0);
        let idle = objective(&sats, &[0.0, 0.0], &m, &prev);
        assert_eq!(idle.eval(&[0, 0]), 0.0);
        // Load term is maximal when everything sits on one satellite.
        let all = [[0, 0], [0, 1], [1, 0], [1, 1]];
        let max = all.iter().map(|a| d.eval(a)).fold(f64::MIN, f64::max);
        assert_eq!(max, d.eval(&[0, 0]));
    }

    #[test]
    fn swap_matching_examples() {
        let cand = Candidates::new(vec![vec![0, 1], vec![0, 1]]);
        let sats = [0, 1];
        let q = [1.0, 1.0];
        let m = [0.0, 0.0];
        let prev = [Some(0), Some(0)];
        let d = objective(&sats, &q, &m, &prev);
        let out = swap_matching(Assignment { serving: vec![0, 0] }, &cand, &d, 10);
        // Second-kind scan reaches cell 0 first.
        assert_eq!(out.assignment.serving, vec![1, 0]);
        assert_eq!(out.trajectory, vec![0.5, 0.0]);
        // Fixed point stays put.
        let again = swap_matching(out.assignment.clone(), &cand, &d, 10);
        assert_eq!(again.assignment, out.assignment);
        // Visibility gate: cell 1 cannot use satellite 1.
        let gated = Candidates::new(vec![vec![0], vec![0]]);
        let g = swap_matching(Assignment { serving: vec![0, 0] }, &gated, &d, 10);
        assert_eq!(g.assignment.serving, vec![0, 0]);
    }

    #[test]
    fn virtual_queue_discourages_handover() {
        let cand = Candidates::new(vec![vec![0, 1], vec![0, 1]]);
        let sats = [0, 1];
        let q = [1.0, 1.0];
        // Cell 1 already has a large virtual queue; cell 0 has none.
        let m = [0.0, 5.0];
        let prev = [Some(0), Some(0)];
        let d = objective(&sats, &q, &m, &prev);
        let out = swap_matching(Assignment { serving: vec![0, 0] }, &cand, &d, 10);
        assert_eq!(out.assignment.serving, vec![1, 0]);
    }

    #[test]
    fn decide_keeps_usable_satellites_without_trigger() {
        let cand = Candidates::new(vec![vec![0, 1]; 4]);
        let prev = vec![Some(0), Some(0), Some(0), Some(1)];
        let q = vec![5.0; 4];
        let m = vec![0.0; 4];
        let input = HandoverInput {
            epoch: 9,
            previous: &prev,
            candidates: &cand,
            queue: &q,
            virtual_queue: &m,
            h_bar: 0.004,
            load_weight: 100.0,
            sigma: 0.95,
            tau: 3.0,
            attributes: &flat,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = decide(&input, &HandoverConfig::default(), HandoverPolicy::Proposed, &mut rng).unwrap();
        assert_eq!(out.assignment.serving, vec![0, 0, 0, 1]);
        assert!(out.events.is_empty());
        assert!(!out.rebalanced);
    }

    #[test]
    fn decide_reassigns_orphans_and_labels_events() {
        let cand = Candidates::new(vec![vec![1, 2]; 4]);
        let prev = vec![Some(0), Some(0), Some(1), Some(1)];
        let q = vec![5.0; 4];
        let m = vec![0.0; 4];
        let input = HandoverInput {
            epoch: 3,
            previous: &prev,
            candidates: &cand,
            queue: &q,
            virtual_queue: &m,
            h_bar: 0.004,
            load_weight: 100.0,
            sigma: 0.99,
            tau: 9.0,
            attributes: &flat,
        };
        let cfg = HandoverConfig { perturb_fraction: 0.0, ..HandoverConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = decide(&input, &cfg, HandoverPolicy::Proposed, &mut rng).unwrap();
        assert!(out.rebalanced);
        assert_eq!(out.mandatory, vec![0, 1]);
        assert!(out.assignment.is_feasible(&cand));
        let count = |s| out.assignment.serving.iter().filter(|&&x| x == s).count();
        assert_eq!((count(1), count(2)), (2, 2));
        for e in &out.events {
            assert_eq!(e.reason, HandoverReason::Visibility);
            assert!(e.cell < 2);
        }
        let lb = decide(&input, &cfg, HandoverPolicy::LoadBalance, &mut rng).unwrap();
        // Satellite 1 already carries cells 2 and 3, so both orphans go to 2.
        assert_eq!(lb.assignment.serving, vec![2, 2, 1, 1]);
    }
}
