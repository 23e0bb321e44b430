//! Borrowing the terrestrial band: an improved binary sparrow search
//! (tent-map start, s-shaped binarization, local search on the best bird,
//! adaptive crossover on the worse half) followed by a greedy fill.
//!
//! A variable is one (satellite, cell, slot) in which the cell is lit and
//! still has queued data. Turning it on adds `R₂` bits for the cell and
//! radiates into every terrestrial cluster; a cluster tolerates only a
//! limited number of slots whose aggregate INR exceeds the threshold.

use std::cmp::Ordering;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparrowConfig {
    #[serde(rename = "N_pop")]
    pub n_pop: usize,
    /// N″: search iterations.
    #[serde(rename = "N2")]
    pub n2: usize,
    /// N‴: local-search rounds per iteration.
    #[serde(rename = "N3")]
    pub n3: usize,
    #[serde(rename = "P_d")]
    pub producers: usize,
    #[serde(rename = "S_d")]
    pub spectators: usize,
    pub mutation_bits: usize,
    pub crossover_bits_max: usize,
    pub safety_threshold: f64,
    pub tent_parameter: f64,
}

impl Default for SparrowConfig {
    fn default() -> Self {
        Self {
            n_pop: 50,
            n2: 100,
            n3: 10,
            producers: 10,
            spectators: 10,
            mutation_bits: 4,
            crossover_bits_max: 3,
            safety_threshold: 0.8,
            tent_parameter: 0.7,
        }
    }
}

impl SparrowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pop < 2 {
            return Err(Error::Config("N_pop must be at least 2".into()));
        }
        if self.producers + self.spectators > self.n_pop || self.producers == 0 {
            return Err(Error::Config("need 1 ≤ P_d and P_d + S_d ≤ N_pop".into()));
        }
        if self.n3 >= self.n_pop {
            return Err(Error::Config("N3 must be smaller than N_pop".into()));
        }
        if !(self.tent_parameter > 0.0 && self.tent_parameter < 1.0) {
            return Err(Error::Config("tent_parameter must lie in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.safety_threshold) {
            return Err(Error::Config("safety_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShareVar {
    pub slot: usize,
    pub sat: usize,
    pub cell: usize,
}

/// One epoch's spectrum-sharing instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SharingProblem {
    /// Variables ordered by (slot, satellite, cell).
    pub vars: Vec<ShareVar>,
    /// Q′ per cell after beam hopping.
    pub residual: Vec<f64>,
    /// Bits per slot on the terrestrial band, per cell.
    pub rate: Vec<f64>,
    pub slots: usize,
    pub clusters: usize,
    /// Interfered-slot allowance per cluster, ⌊T(1−l_j)⌋.
    pub budgets: Vec<usize>,
    /// Linear INR threshold.
    pub inr_threshold: f64,
    /// INR (linear) each variable causes at each cluster, `inr[v·clusters + j]`.
    pub inr: Vec<f64>,
}

pub fn cluster_budget(slots: usize, load: f64) -> usize {
    (slots as f64 * (1.0 - load)).floor().max(0.0) as usize
}

impl SharingProblem {
    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.inr.len() != self.vars.len() * self.clusters || self.budgets.len() != self.clusters {
            return Err(Error::Config("sharing problem dimensions disagree".into()));
        }
        if self.residual.len() != self.rate.len() {
            return Err(Error::Config("residual and rate lengths differ".into()));
        }
        if self.vars.windows(2).any(|w| w[0] >= w[1]) || self.vars.iter().any(|v| v.slot >= self.slots) {
            return Err(Error::Config("variables must be strictly ordered by (slot, sat, cell)".into()));
        }
        Ok(())
    }

    /// `Σ_c Ω_c` with `Ω_c = Q′² + (R₂T)²`.
    pub fn omega(&self) -> f64 {
        self.residual.iter().zip(&self.rate).map(|(q, r)| q * q + (r * self.slots as f64).powi(2)).sum()
    }

    /// Terrestrial-band bits per cell (not capped at the queue).
    pub fn served(&self, z: &[bool]) -> Vec<f64> {
        let mut d = vec![0.0; self.residual.len()];
        for (v, &on) in self.vars.iter().zip(z) {
            if on {
                d[v.cell] += self.rate[v.cell];
            }
        }
        d
    }

    /// Interfered-slot count per cluster, by direct summation.
    pub fn interfered_counts(&self, z: &[bool]) -> Vec<usize> {
        let mut counts = vec![0; self.clusters];
        let mut agg = vec![0.0; self.clusters];
        let mut start = 0;
        while start < self.vars.len() {
            let slot = self.vars[start].slot;
            let end = start + self.vars[start..].iter().take_while(|v| v.slot == slot).count();
            agg.iter_mut().for_each(|a| *a = 0.0);
            let mut any = false;
            for v in start..end {
                if z[v] {
                    any = true;
                    for (a, x) in agg.iter_mut().zip(&self.inr[v * self.clusters..(v + 1) * self.clusters]) {
                        *a += x;
                    }
                }
            }
            if any {
                for (c, a) in counts.iter_mut().zip(&agg) {
                    if *a > self.inr_threshold {
                        *c += 1;
                    }
                }
            }
            start = end;
        }
        counts
    }

    pub fn is_feasible(&self, z: &[bool]) -> bool {
        self.interfered_counts(z).iter().zip(&self.budgets).all(|(c, b)| c <= b)
    }

    /// Reference fitness by direct evaluation.
    pub fn fitness(&self, z: &[bool]) -> f64 {
        let omega = self.omega();
        if self.is_feasible(z) {
            let d = self.served(z);
            omega - d.iter().zip(&self.residual).map(|(d, q)| (d - q).powi(2)).sum::<f64>()
        } else {
            omega - self.residual.iter().map(|q| q * q).sum::<f64>()
        }
    }
}

/// Largest per-slot variable count for which all subset outcomes are tabulated.
const TABLE_BITS: usize = 8;

/// Fast fitness and feasibility evaluation with per-slot tables of the
/// clusters interfered by every subset of that slot's variables.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    problem: &'a SharingProblem,
    /// Variable range of each non-empty slot.
    groups: Vec<(usize, usize)>,
    /// `tables[g][mask]`: interfered clusters, when the group is small enough.
    tables: Vec<Option<Vec<Vec<u16>>>>,
    /// `bitsets[g][mask·words..]`: the same sets as `tables`, one bit per cluster.
    bitsets: Vec<Option<Vec<u64>>>,
    words: usize,
    /// Bit-sliced per-cluster counters: plane `p` holds bit `p` of every count.
    planes: Vec<u64>,
    budget_planes: Vec<u64>,
    plane_count: usize,
    bits_scratch: Vec<u64>,
    omega: f64,
    counts: Vec<u32>,
    served: Vec<f64>,
    agg: Vec<f64>,
    scratch: Vec<u16>,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a SharingProblem) -> Self {
        let n = problem.clusters;
        let mut groups = Vec::new();
        let mut start = 0;
        while start < problem.vars.len() {
            let slot = problem.vars[start].slot;
            let end = start + problem.vars[start..].iter().take_while(|v| v.slot == slot).count();
            groups.push((start, end));
            start = end;
        }
        let mut sums = Vec::new();
        let tables: Vec<Option<Vec<Vec<u16>>>> = groups
            .iter()
            .map(|&(s, e)| {
                let k = e - s;
                if k > TABLE_BITS {
                    return None;
                }
                sums.clear();
                sums.resize(n << k, 0.0);
                let mut table = vec![Vec::new(); 1 << k];
                for mask in 1usize..(1 << k) {
                    let low = mask.trailing_zeros() as usize;
                    let rest = mask & (mask - 1);
                    let contrib = &problem.inr[(s + low) * n..(s + low + 1) * n];
                    for j in 0..n {
                        sums[mask * n + j] = sums[rest * n + j] + contrib[j];
                    }
                    table[mask] =
                        (0..n).filter(|&j| sums[mask * n + j] > problem.inr_threshold).map(|j| j as u16).collect();
                }
                Some(table)
            })
            .collect();
        let words = n.div_ceil(64);
        let bitsets = tables
            .iter()
            .map(|t| {
                t.as_ref().map(|lists| {
                    let mut bits = vec![0u64; lists.len() * words];
                    for (mask, list) in lists.iter().enumerate() {
                        for &j in list {
                            bits[mask * words + j as usize / 64] |= 1 << (j % 64);
                        }
                    }
                    bits
                })
            })
            .collect();
        // Counts never exceed the number of slots, nor do budgets.
        let max_value = problem.slots.max(problem.budgets.iter().copied().max().unwrap_or(0));
        let plane_count = (usize::BITS - max_value.leading_zeros()) as usize;
        let mut budget_planes = vec![0u64; plane_count * words];
        for (j, &b) in problem.budgets.iter().enumerate() {
            for p in 0..plane_count {
                if b >> p & 1 == 1 {
                    budget_planes[p * words + j / 64] |= 1 << (j % 64);
                }
            }
        }
        Self {
            problem,
            groups,
            tables,
            bitsets,
            words,
            planes: vec![0; plane_count * words],
            budget_planes,
            plane_count,
            bits_scratch: vec![0; words],
            omega: problem.omega(),
            counts: vec![0; n],
            served: vec![0.0; problem.residual.len()],
            agg: vec![0.0; n],
            scratch: Vec::new(),
        }
    }

    pub fn problem(&self) -> &SharingProblem {
        self.problem
    }

    /// Appends the clusters interfered in group `g` under `z` to `out`.
    fn group_interfered(&mut self, g: usize, z: &[bool], out: &mut Vec<u16>) {
        let (s, e) = self.groups[g];
        match &self.tables[g] {
            Some(table) => {
                let mask = (s..e).enumerate().filter(|&(_, v)| z[v]).fold(0usize, |m, (i, _)| m | 1 << i);
                out.extend_from_slice(&table[mask]);
            }
            None => {
                let n = self.problem.clusters;
                self.agg.iter_mut().for_each(|a| *a = 0.0);
                let mut any = false;
                for v in s..e {
                    if z[v] {
                        any = true;
                        for (a, x) in self.agg.iter_mut().zip(&self.problem.inr[v * n..(v + 1) * n]) {
                            *a += x;
                        }
                    }
                }
                if any {
                    let th = self.problem.inr_threshold;
                    out.extend((0..n).filter(|&j| self.agg[j] > th).map(|j| j as u16));
                }
            }
        }
    }

    fn fill_counts(&mut self, z: &[bool]) {
        self.counts.iter_mut().for_each(|c| *c = 0);
        let mut buf = std::mem::take(&mut self.scratch);
        for g in 0..self.groups.len() {
            buf.clear();
            self.group_interfered(g, z, &mut buf);
            for &j in &buf {
                self.counts[j as usize] += 1;
            }
        }
        self.scratch = buf;
    }

    pub fn is_feasible(&mut self, z: &[bool]) -> bool {
        let words = self.words;
        self.planes.iter_mut().for_each(|w| *w = 0);
        let mut list = std::mem::take(&mut self.scratch);
        for g in 0..self.groups.len() {
            let (s, e) = self.groups[g];
            let bits: &[u64] = match &self.bitsets[g] {
                Some(table) => {
                    let mask = (s..e).enumerate().filter(|&(_, v)| z[v]).fold(0usize, |m, (i, _)| m | 1 << i);
                    if mask == 0 {
                        continue;
                    }
                    &table[mask * words..(mask + 1) * words]
                }
                None => {
                    list.clear();
                    self.group_interfered(g, z, &mut list);
                    self.bits_scratch.iter_mut().for_each(|w| *w = 0);
                    for &j in &list {
                        self.bits_scratch[j as usize / 64] |= 1 << (j % 64);
                    }
                    &self.bits_scratch
                }
            };
            // Ripple-carry add of a 0/1 vector into the sliced counters.
            for (w, &b) in bits.iter().enumerate() {
                let mut carry = b;
                let mut p = 0;
                while carry != 0 && p < self.plane_count {
                    let slot = &mut self.planes[p * words + w];
                    let next = *slot & carry;
                    *slot ^= carry;
                    carry = next;
                    p += 1;
                }
            }
        }
        self.scratch = list;
        // Bit-sliced comparison, most significant plane first.
        (0..words).all(|w| {
            let (mut greater, mut equal) = (0u64, !0u64);
            for p in (0..self.plane_count).rev() {
                let c = self.planes[p * words + w];
                let b = self.budget_planes[p * words + w];
                greater |= equal & c & !b;
                equal &= !(c ^ b);
            }
            greater == 0
        })
    }

    pub fn fitness(&mut self, z: &[bool]) -> f64 {
        let p = self.problem;
        if !self.is_feasible(z) {
            return self.zero_fitness();
        }
        self.served.iter_mut().for_each(|d| *d = 0.0);
        for (v, &on) in p.vars.iter().zip(z) {
            if on {
                self.served[v.cell] += p.rate[v.cell];
            }
        }
        self.omega - self.served.iter().zip(&p.residual).map(|(d, q)| (d - q).powi(2)).sum::<f64>()
    }

    /// Fitness of the all-zeros vector, which every infeasible vector shares.
    pub fn zero_fitness(&self) -> f64 {
        self.omega - self.problem.residual.iter().map(|q| q * q).sum::<f64>()
    }

    /// Group index containing variable `v`.
    fn group_of(&self, v: usize) -> usize {
        self.groups.partition_point(|&(_, e)| e <= v)
    }
}

/// One step of the tent map with parameter `a`.
pub fn tent_map(x: f64, a: f64) -> f64 {
    if x < a {
        x / a
    } else {
        (1.0 - x) / (1.0 - a)
    }
}

/// Population of `n_pop` tent-map sequences of length `dim` in (0, 1).
/// Values that land on 0, 1 or the map's fixed point are re-seeded.
pub fn tent_init<R: Rng>(dim: usize, n_pop: usize, a: f64, rng: &mut R) -> Vec<Vec<f64>> {
    let fixed = 1.0 / (2.0 - a);
    let fresh = |rng: &mut R| rng.gen_range(1e-6..1.0 - 1e-6);
    (0..n_pop)
        .map(|_| {
            let mut x = fresh(rng);
            (0..dim)
                .map(|_| {
                    let out = x;
                    x = tent_map(x, a);
                    if !(x > 1e-9 && x < 1.0 - 1e-9) || (x - fixed).abs() < 1e-9 {
                        x = fresh(rng);
                    }
                    out
                })
                .collect()
        })
        .collect()
}

/// S-shaped transfer: 1 when `1/(1+e^{−2s}) > μ`.
pub fn binarize(s: f64, mu: f64) -> bool {
    1.0 / (1.0 + (-2.0 * s).exp()) > mu
}

/// [`binarize`] with a lookup table of the transfer function on the clamped
/// position range. Draws far from the table bracket are decided without
/// evaluating the exponential; the rest fall back to [`binarize`], so the
/// result is identical.
pub struct Binarizer {
    table: Vec<f64>,
}

const BINARIZE_LO: f64 = -5.0;
const BINARIZE_HI: f64 = 5.0;
const BINARIZE_CELLS: usize = 4096;
/// Guard against rounding in the table entries.
const BINARIZE_MARGIN: f64 = 1e-12;

impl Binarizer {
    pub fn new() -> Self {
        let step = (BINARIZE_HI - BINARIZE_LO) / BINARIZE_CELLS as f64;
        let table =
            (0..=BINARIZE_CELLS).map(|i| 1.0 / (1.0 + (-2.0 * (BINARIZE_LO + i as f64 * step)).exp())).collect();
        Self { table }
    }

    pub fn apply(&self, s: f64, mu: f64) -> bool {
        if !(BINARIZE_LO..BINARIZE_HI).contains(&s) {
            return binarize(s, mu);
        }
        let i = ((s - BINARIZE_LO) * (BINARIZE_CELLS as f64 / (BINARIZE_HI - BINARIZE_LO))) as usize;
        let i = i.min(BINARIZE_CELLS - 1);
        if mu < self.table[i] - BINARIZE_MARGIN {
            true
        } else if mu >= self.table[i + 1] + BINARIZE_MARGIN {
            false
        } else {
            binarize(s, mu)
        }
    }
}

impl Default for Binarizer {
    fn default() -> Self {
        Self::new()
    }
}

/// Crossover probability at iteration `i` of `n2`.
pub fn upsilon(i: usize, n2: usize) -> f64 {
    0.55 - 0.1 / (1.0 + (5.0 - 10.0 * i as f64 / n2 as f64).exp())
}

/// Continuous value that binarizes to `bit` with high probability.
fn anchor(bit: bool) -> f64 {
    if bit {
        2.5
    } else {
        -2.5
    }
}

/// Mutates `mutation_bits` random bits of the best vector per round and keeps
/// strict improvements. Returns the (possibly improved) fitness.
pub fn local_search<R: Rng>(
    best: &mut [bool],
    best_fitness: f64,
    rounds: usize,
    mutation_bits: usize,
    eval: &mut Evaluator<'_>,
    rng: &mut R,
) -> f64 {
    let dim = best.len();
    let mut fit = best_fitness;
    if dim == 0 {
        return fit;
    }
    let mut trial = best.to_vec();
    for _ in 0..rounds {
        trial.copy_from_slice(best);
        for _ in 0..mutation_bits {
            let j = rng.gen_range(0..dim);
            trial[j] = !trial[j];
        }
        let f = eval.fitness(&trial);
        if f > fit {
            fit = f;
            best.copy_from_slice(&trial);
        }
    }
    fit
}

/// Flips 1..=`max_bits` random bits of each given bird with probability `υ`.
/// Returns the indices that were flipped per bird.
pub fn adaptive_crossover<R: Rng>(
    birds: &mut [Vec<bool>],
    iteration: usize,
    n2: usize,
    max_bits: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let u = upsilon(iteration, n2);
    birds
        .iter_mut()
        .map(|bird| {
            if bird.is_empty() || rng.gen::<f64>() >= u {
                return Vec::new();
            }
            let zeta = rng.gen_range(1..=max_bits.max(1));
            let picked: Vec<usize> = (0..zeta).map(|_| rng.gen_range(0..bird.len())).collect();
            for &j in &picked {
                bird[j] = !bird[j];
            }
            picked
        })
        .collect()
}

/// Visiting order of the greedy fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanOrder {
    /// Variable order (slot, satellite, cell).
    Index,
    /// Cells by descending residual queue, each cell's slots ascending.
    Queue,
}

/// Turns variables on one at a time when the result stays feasible and the
/// fitness does not drop.
pub fn greedy_post_pass(z: &mut [bool], eval: &mut Evaluator<'_>, order: ScanOrder) {
    greedy_fill(z, eval, order, true);
}

/// Flip-to-1 scan. With `fitness_gate` a flip must also keep the fitness
/// from dropping; without it every feasible flip is taken.
fn greedy_fill(z: &mut [bool], eval: &mut Evaluator<'_>, order: ScanOrder, fitness_gate: bool) {
    let p = eval.problem;
    let mut order_idx: Vec<usize> = (0..p.dim()).collect();
    if order == ScanOrder::Queue {
        order_idx.sort_by(|&a, &b| {
            let (ca, cb) = (p.vars[a].cell, p.vars[b].cell);
            p.residual[cb].partial_cmp(&p.residual[ca]).unwrap_or(Ordering::Equal).then(ca.cmp(&cb)).then(a.cmp(&b))
        });
    }
    eval.fill_counts(z);
    let mut counts = eval.counts.clone();
    let mut served = p.served(z);
    let (mut before, mut after) = (Vec::new(), Vec::new());
    for v in order_idx {
        if z[v] {
            continue;
        }
        let cell = p.vars[v].cell;
        let (q, r) = (p.residual[cell], p.rate[cell]);
        if fitness_gate && (served[cell] + r - q).powi(2) > (served[cell] - q).powi(2) {
            continue;
        }
        let g = eval.group_of(v);
        before.clear();
        eval.group_interfered(g, z, &mut before);
        z[v] = true;
        after.clear();
        eval.group_interfered(g, z, &mut after);
        let fits = after
            .iter()
            .filter(|j| !before.contains(j))
            .all(|&j| counts[j as usize] as usize + 1 <= p.budgets[j as usize]);
        if fits {
            for &j in &before {
                counts[j as usize] -= 1;
            }
            for &j in &after {
                counts[j as usize] += 1;
            }
            served[cell] += r;
        } else {
            z[v] = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharingOutcome {
    pub z: Vec<bool>,
    pub fitness: f64,
    /// Fitness of the sparrow-search global best before the greedy fill.
    pub search_fitness: f64,
    /// Global best after initialization and after every iteration.
    pub best_trajectory: Vec<f64>,
}

fn rank(fitness: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&a, &b| fitness[b].partial_cmp(&fitness[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    idx
}

/// Improved binary sparrow search followed by the greedy fill. The global
/// best starts at the all-zeros vector, so the result is always feasible.
pub fn solve_sharing<R: Rng>(problem: &SharingProblem, cfg: &SparrowConfig, rng: &mut R) -> SharingOutcome {
    let dim = problem.dim();
    let mut eval = Evaluator::new(problem);
    let mut best = vec![false; dim];
    let mut best_fit = eval.zero_fitness();
    if dim == 0 {
        return SharingOutcome {
            z: best,
            fitness: best_fit,
            search_fitness: best_fit,
            best_trajectory: vec![best_fit],
        };
    }
    let n = cfg.n_pop;
    let binarizer = Binarizer::new();
    let mut pos = tent_init(dim, n, cfg.tent_parameter, rng);
    let mut bits: Vec<Vec<bool>> =
        pos.iter().map(|x| x.iter().map(|&s| binarizer.apply(s, rng.gen())).collect()).collect();
    let mut fit: Vec<f64> = bits.iter().map(|b| eval.fitness(b)).collect();
    let mut trajectory = Vec::with_capacity(cfg.n2 + 1);
    let adopt = |b: &[bool], f: f64, best: &mut Vec<bool>, best_fit: &mut f64| {
        if f > *best_fit {
            *best_fit = f;
            best.copy_from_slice(b);
        }
    };
    for i in 0..n {
        adopt(&bits[i], fit[i], &mut best, &mut best_fit);
    }
    trajectory.push(best_fit);

    for iter in 0..cfg.n2 {
        let order = rank(&fit);
        // Local search on the current best bird.
        let top = order[0];
        let improved = local_search(&mut bits[top], fit[top], cfg.n3, cfg.mutation_bits, &mut eval, rng);
        if improved > fit[top] {
            fit[top] = improved;
            for (x, &b) in pos[top].iter_mut().zip(&bits[top]) {
                *x = anchor(b);
            }
        }
        adopt(&bits[top], fit[top], &mut best, &mut best_fit);

        // Adaptive crossover on the worse half.
        let worse: Vec<usize> = order[n / 2..].to_vec();
        let mut half: Vec<Vec<bool>> = worse.iter().map(|&k| bits[k].clone()).collect();
        let flips = adaptive_crossover(&mut half, iter, cfg.n2, cfg.crossover_bits_max, rng);
        for ((&k, bird), flipped) in worse.iter().zip(half).zip(flips) {
            for j in flipped {
                pos[k][j] = anchor(bird[j]);
            }
            bits[k] = bird;
        }

        // Standard producer / scrounger / spectator moves.
        let order = rank(&fit);
        let best_bird = order[0];
        let worst_bird = order[n - 1];
        let x_best = pos[best_bird].clone();
        let x_worst = pos[worst_bird].clone();
        let (f_best, f_worst) = (fit[best_bird], fit[worst_bird]);
        let warning: f64 = rng.gen();
        let mut next = pos.clone();
        for (rank_i, &k) in order.iter().enumerate() {
            let r1 = rank_i + 1;
            if rank_i < cfg.producers {
                if warning < cfg.safety_threshold {
                    let alpha: f64 = rng.gen_range(1e-3..=1.0);
                    let shrink = (-(r1 as f64) / (alpha * cfg.n2 as f64)).exp();
                    next[k].iter_mut().for_each(|x| *x *= shrink);
                } else {
                    let q: f64 = rng.sample(StandardNormal);
                    next[k].iter_mut().for_each(|x| *x += q);
                }
            } else if r1 > n / 2 {
                let q: f64 = rng.sample(StandardNormal);
                for (x, w) in next[k].iter_mut().zip(&x_worst) {
                    *x = q * ((w - *x) / (r1 * r1) as f64).exp();
                }
            } else {
                let producer = &pos[order[0]];
                let step: f64 = pos[k]
                    .iter()
                    .zip(producer)
                    .map(|(x, p)| (x - p).abs() * if rng.gen::<bool>() { 1.0 } else { -1.0 })
                    .sum::<f64>()
                    / dim as f64;
                for (x, p) in next[k].iter_mut().zip(producer) {
                    *x = p + step;
                }
            }
        }
        let watchers = rand::seq::index::sample(rng, n, cfg.spectators.min(n));
        for k in watchers.into_iter() {
            if fit[k] < f_best {
                let beta: f64 = rng.sample(StandardNormal);
                for (x, b) in next[k].iter_mut().zip(&x_best) {
                    *x = b + beta * (*x - b).abs();
                }
            } else {
                let kk: f64 = rng.gen_range(-1.0..=1.0);
                let denom = (fit[k] - f_worst).abs() + 1e-12;
                for (x, w) in next[k].iter_mut().zip(&x_worst) {
                    *x += kk * (*x - w).abs() / denom;
                }
            }
        }
        for row in &mut next {
            for x in row.iter_mut() {
                *x = if x.is_finite() { x.clamp(-5.0, 5.0) } else { 0.0 };
            }
        }
        pos = next;
        for k in 0..n {
            for (b, &x) in bits[k].iter_mut().zip(&pos[k]) {
                *b = binarizer.apply(x, rng.gen());
            }
            fit[k] = eval.fitness(&bits[k]);
            adopt(&bits[k], fit[k], &mut best, &mut best_fit);
        }
        trajectory.push(best_fit);
    }

    // The greedy fill runs from the search result and from all zeros; the
    // better of the two is kept so the search never loses to its fallback.
    let search_fitness = best_fit;
    let mut z = best;
    greedy_post_pass(&mut z, &mut eval, ScanOrder::Index);
    let mut fitness = eval.fitness(&z);
    let mut plain = vec![false; dim];
    greedy_post_pass(&mut plain, &mut eval, ScanOrder::Index);
    let plain_fitness = eval.fitness(&plain);
    if plain_fitness > fitness {
        z = plain;
        fitness = plain_fitness;
    }
    SharingOutcome { z, fitness, search_fitness, best_trajectory: trajectory }
}

/// Greedy baseline: cells in descending residual-queue order take every
/// slot that keeps the interference budgets, regardless of fitness.
pub fn greedy_share(problem: &SharingProblem) -> Vec<bool> {
    let mut z = vec![false; problem.dim()];
    let mut eval = Evaluator::new(problem);
    greedy_fill(&mut z, &mut eval, ScanOrder::Queue, false);
    z
}
