//! The epoch loop: geometry, serving-satellite decision, beam hopping,
//! spectrum sharing, then queue and metric updates.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::beamhop::{beamhop_epoch, build_conflict_graph, HopOrder};
use crate::error::{Error, Result};
use crate::geometry::{build_snapshot, remaining_visibility_s, ConstellationSnapshot};
use crate::handover::{
    assign_min_load, decide, imbalance_index, utilization_rate, Assignment, Candidates, HandoverEvent, HandoverInput,
    LinkAttributes,
};
use crate::linkbudget::{conflict_pairs, db_to_linear, slot_rate_bits, terrestrial_contribution, LinkContext};
use crate::rng::{stream, Purpose};
use crate::spectrum::{cluster_budget, greedy_share, solve_sharing, ShareVar, SharingProblem};
use crate::traffic::{
    handover_increment, p0_objective_term, sample_arrivals, sample_cluster_loads, update_data_queue,
    update_virtual_queue,
};

use super::config::{LoadDrawMode, PoolMode, ScenarioConfig, SharePolicy};
use super::metrics::{metrics_summary, write_metrics_csv, MetricsFrame, MetricsSummary};
use super::scenario::{build_layout, candidates, GroundLayout, SatellitePool};
use super::trace::TraceWriter;
use super::validate::{validate_decision, EpochDecision, ValidationContext};

/// Remaining-visibility search used by the multi-attribute score.
const VISIBILITY_STEP_S: f64 = 1.0;
const VISIBILITY_HORIZON_S: f64 = 900.0;

/// Cluster loads l_j in effect during `epoch`.
pub fn cluster_loads(cfg: &ScenarioConfig, epoch: u64) -> Vec<f64> {
    let count = cfg.cell_count() * cfg.layout.clusters_per_cell as usize;
    let draw_epoch = match cfg.cluster_load.mode {
        LoadDrawMode::Static => 0,
        LoadDrawMode::PerEpoch => epoch,
    };
    sample_cluster_loads(count, (cfg.cluster_load.min, cfg.cluster_load.max), draw_epoch, cfg.seed)
}

/// Load Balance baseline: each listed cell takes its least-loaded candidate
/// satellite, ties to the lower id. Loads accumulate as cells are assigned.
pub fn baseline_load_balance(
    cells: &[usize],
    loads: &BTreeMap<usize, f64>,
    candidates: &Candidates,
    queue: &[f64],
) -> Result<Vec<(usize, usize)>> {
    let mut loads = loads.clone();
    assign_min_load(cells, candidates, queue, &mut loads)
}

/// Greedy sharing baseline: cells in descending queue order switch on every
/// slot they can while the interference budgets hold.
pub fn baseline_greedy_share(problem: &SharingProblem) -> Vec<bool> {
    greedy_share(problem)
}

/// Everything produced by one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub decision: EpochDecision,
    pub frame: MetricsFrame,
    pub events: Vec<HandoverEvent>,
    pub sharing_fitness: Option<f64>,
}

/// Mutable state of a run.
pub struct Simulation {
    cfg: ScenarioConfig,
    layout: GroundLayout,
    pool: SatellitePool,
    targets: Vec<f64>,
    rate_w1: Vec<f64>,
    rate_w2: Vec<f64>,
    epoch: u64,
    queue: Vec<f64>,
    virtual_queue: Vec<f64>,
    handovers: Vec<u64>,
    previous: Vec<Option<usize>>,
    sigma: f64,
    tau: f64,
}

impl Simulation {
    pub fn new(mut cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = build_layout(&cfg.layout, cfg.seed)?;
        let cells = cfg.cell_count();
        let targets = vec![cfg.target_snr_db; cells];
        let rate_w1 = targets.iter().map(|&s| slot_rate_bits(cfg.radio.sat_bandwidth_hz, &cfg.radio, s)).collect();
        let rate_w2 = targets.iter().map(|&s| slot_rate_bits(cfg.radio.terr_bandwidth_hz, &cfg.radio, s)).collect();
        // The queue starts holding one epoch of arrivals.
        let queue = sample_arrivals(&cfg.arrivals, 0, cfg.epoch_duration_s, cfg.seed);
        Ok(Self {
            layout,
            pool: SatellitePool::default(),
            targets,
            rate_w1,
            rate_w2,
            epoch: 0,
            queue,
            virtual_queue: vec![0.0; cells],
            handovers: vec![0; cells],
            previous: vec![None; cells],
            sigma: 0.0,
            tau: 0.0,
            cfg,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &GroundLayout {
        &self.layout
    }

    pub fn queue(&self) -> &[f64] {
        &self.queue
    }

    pub fn virtual_queue(&self) -> &[f64] {
        &self.virtual_queue
    }

    pub fn handover_counts(&self) -> &[u64] {
        &self.handovers
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn snapshot(&self, epoch: u64) -> Result<ConstellationSnapshot> {
        build_snapshot(
            &self.cfg.orbit,
            &self.layout.cells,
            &self.layout.clusters,
            epoch,
            self.cfg.epoch_duration_s,
            self.cfg.min_elevation_deg.to_radians(),
        )
    }

    /// Advances one epoch.
    pub fn step(&mut self) -> Result<EpochReport> {
        let f = self.epoch + 1;
        let cfg = &self.cfg;
        let cells = cfg.cell_count();
        let beams = cfg.beams_per_satellite;
        let slots = cfg.slots_per_epoch;
        let min_el = cfg.min_elevation_deg.to_radians();
        let snap = self.snapshot(f)?;

        if cfg.pool.mode == PoolMode::Shared {
            self.pool.update(&snap, cfg.pool.size);
        }
        let cand = candidates(&snap, &self.pool, &cfg.pool)?;
        let attributes = |s: usize, c: usize| LinkAttributes {
            remaining_s: remaining_visibility_s(
                &cfg.orbit,
                s,
                snap.cell_positions[c],
                snap.time_s,
                min_el,
                VISIBILITY_STEP_S,
                VISIBILITY_HORIZON_S,
            ),
            elevation_rad: snap.elevation(s, c),
        };
        let input = HandoverInput {
            epoch: f,
            previous: &self.previous,
            candidates: &cand,
            queue: &self.queue,
            virtual_queue: &self.virtual_queue,
            h_bar: cfg.lyapunov.h_bar,
            load_weight: if cfg.scale_load_term_by_v { cfg.lyapunov.v } else { 1.0 },
            sigma: self.sigma,
            tau: self.tau,
            attributes: &attributes,
        };
        let mut rng = stream(cfg.seed, f, Purpose::Perturbation);
        let outcome = decide(&input, &cfg.handover, cfg.policy.handover, &mut rng)?;
        let serving = outcome.assignment.serving.clone();

        let link = LinkContext::new(&snap, &cfg.radio, &self.targets);
        let conflicts = conflict_pairs(&link, &serving, beams)?;
        let graph = build_conflict_graph(&serving, &conflicts, beams, |b| cfg.radio.polarization_of(b));
        let order = match cfg.policy.beamhop {
            super::config::HopPolicy::Proposed => HopOrder::WeightRatio,
            super::config::HopPolicy::GreedyHop => HopOrder::Queue,
        };
        let hop = beamhop_epoch(&graph, &self.queue, &self.rate_w1, slots, order);

        let loads = cluster_loads(cfg, f);
        let budgets: Vec<usize> = loads.iter().map(|&l| cluster_budget(slots, l)).collect();
        let problem = self.sharing_problem(&link, &serving, &hop.schedule.slots, &hop.residual, &budgets)?;
        let (z, sharing_fitness) = match cfg.policy.sharing {
            SharePolicy::None => (vec![false; problem.dim()], None),
            SharePolicy::GreedyShare => {
                let z = baseline_greedy_share(&problem);
                let fit = problem.fitness(&z);
                (z, Some(fit))
            }
            SharePolicy::Proposed => {
                let mut rng = stream(cfg.seed, f, Purpose::Sparrow);
                let out = solve_sharing(&problem, &cfg.sparrow, &mut rng);
                (out.z, Some(out.fitness))
            }
        };
        let sharing: Vec<ShareVar> = problem.vars.iter().zip(&z).filter(|(_, &on)| on).map(|(v, _)| *v).collect();
        let served_w2: Vec<f64> = problem.served(&z).iter().zip(&hop.residual).map(|(d, q)| d.min(*q)).collect();
        let served: Vec<f64> = hop.served.iter().zip(&served_w2).map(|(a, b)| a + b).collect();

        let decision = EpochDecision {
            epoch: f,
            serving: serving.clone(),
            schedule: hop.schedule,
            sharing,
            mandatory_cells: outcome.mandatory.len(),
            rebalanced: outcome.rebalanced,
        };
        if cfg.validate_decisions {
            let ctx = ValidationContext {
                snapshot: &snap,
                link,
                conflicts: &conflicts,
                budgets: &budgets,
                beams_per_satellite: beams,
                slots,
            };
            let report = validate_decision(&decision, &ctx)?;
            if let Some(v) = report.first() {
                return Err(Error::Domain(format!("decision failed validation ({} issues): {v}", report.len())));
            }
        }

        // Metrics of the decision, measured before the queues move on.
        let active: Vec<usize> = {
            let mut s = serving.clone();
            s.sort_unstable();
            s.dedup();
            s
        };
        let sigma = utilization_rate(decision.schedule.busy_beam_slots(), active.len(), beams, slots);
        let sat_loads: Vec<f64> = active
            .iter()
            .map(|&s| Assignment { serving: serving.clone() }.cells_of(s).map(|c| self.queue[c]).sum())
            .collect();
        let tau = imbalance_index(&sat_loads);
        let p0 = p0_objective_term(&served, &self.queue);

        let arrivals = sample_arrivals(&cfg.arrivals, f, cfg.epoch_duration_s, cfg.seed);
        let mut epoch_handovers = 0;
        for c in 0..cells {
            let inc = handover_increment(self.previous[c], serving[c]);
            epoch_handovers += inc;
            self.handovers[c] += inc as u64;
            self.virtual_queue[c] = update_virtual_queue(self.virtual_queue[c], inc, cfg.lyapunov.h_bar);
            self.queue[c] = update_data_queue(self.queue[c], served[c], arrivals[c]);
            self.previous[c] = Some(serving[c]);
        }
        self.sigma = sigma;
        self.tau = tau;
        self.epoch = f;

        let freq: Vec<f64> = self.handovers.iter().map(|&h| h as f64 / f as f64).collect();
        let frame = MetricsFrame {
            epoch: f,
            p0_term: p0,
            mean_queue_bits: mean(&self.queue),
            mean_handover_freq: mean(&freq),
            max_handover_freq: freq.iter().copied().fold(0.0, f64::max),
            sigma,
            tau,
            served_w1_bits: hop.served.iter().sum(),
            served_w2_bits: served_w2.iter().sum(),
            arrived_bits: arrivals.iter().sum(),
            mean_virtual_queue: mean(&self.virtual_queue),
            handovers: epoch_handovers,
            mandatory_cells: outcome.mandatory.len() as u32,
            rebalanced: outcome.rebalanced as u8,
            conflict_pairs: conflicts.len() as u32,
            sharing_vars: problem.dim() as u32,
            sharing_on: decision.sharing.len() as u32,
        };
        Ok(EpochReport { decision, frame, events: outcome.events, sharing_fitness })
    }

    /// Terrestrial-band variables: every lit link whose cell still has
    /// backlog after beam hopping, in (slot, satellite, cell) order.
    fn sharing_problem(
        &self,
        link: &LinkContext<'_>,
        serving: &[usize],
        schedule: &[Vec<crate::linkbudget::BeamLink>],
        residual: &[f64],
        budgets: &[usize],
    ) -> Result<SharingProblem> {
        let cfg = &self.cfg;
        let clusters = self.layout.clusters.len();
        let noise = cfg.radio.noise_power(cfg.radio.terr_bandwidth_hz);
        let mut vars = Vec::new();
        if cfg.policy.sharing != SharePolicy::None {
            for (t, links) in schedule.iter().enumerate() {
                let mut slot_vars: Vec<ShareVar> = links
                    .iter()
                    .filter(|l| residual[l.cell] > 0.0)
                    .map(|l| ShareVar { slot: t, sat: l.sat, cell: l.cell })
                    .collect();
                slot_vars.sort_unstable();
                vars.extend(slot_vars);
            }
        }
        let mut columns: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut inr = Vec::with_capacity(vars.len() * clusters);
        for v in &vars {
            if !columns.contains_key(&v.cell) {
                let col = (0..clusters)
                    .map(|j| terrestrial_contribution(link, j, serving[v.cell], v.cell).map(|w| w / noise))
                    .collect::<Result<Vec<_>>>()?;
                columns.insert(v.cell, col);
            }
            inr.extend_from_slice(&columns[&v.cell]);
        }
        let problem = SharingProblem {
            vars,
            residual: residual.to_vec(),
            rate: self.rate_w2.clone(),
            slots: cfg.slots_per_epoch,
            clusters,
            budgets: budgets.to_vec(),
            inr_threshold: db_to_linear(cfg.radio.inr_terr_db),
            inr,
        };
        problem.validate()?;
        Ok(problem)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Runs `cfg.epochs` epochs, handing each report to `sink`.
pub fn run_with(cfg: ScenarioConfig, mut sink: impl FnMut(&EpochReport) -> Result<()>) -> Result<Vec<MetricsFrame>> {
    let mut sim = Simulation::new(cfg)?;
    let mut frames = Vec::with_capacity(sim.cfg.epochs as usize);
    for _ in 0..sim.cfg.epochs {
        let report = sim.step()?;
        sink(&report)?;
        frames.push(report.frame);
    }
    Ok(frames)
}

/// Runs without keeping decisions.
pub fn run(cfg: ScenarioConfig) -> Result<Vec<MetricsFrame>> {
    run_with(cfg, |_| Ok(()))
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const TRACE_FILE: &str = "decisions.trace";
pub const SUMMARY_FILE: &str = "summary.json";

/// Trailing epochs averaged in the summary.
pub const SUMMARY_WINDOW: usize = 500;

/// Runs a scenario and writes the metrics CSV, the decisions trace and the
/// JSON summary into `out_dir`.
pub fn run_to_dir(cfg: ScenarioConfig, out_dir: &Path) -> Result<MetricsSummary> {
    std::fs::create_dir_all(out_dir)?;
    let mut trace = TraceWriter::new(BufWriter::new(File::create(out_dir.join(TRACE_FILE))?), &cfg)?;
    let frames = run_with(cfg, |r| trace.epoch(&r.decision))?;
    trace.finish()?;
    write_metrics_csv(BufWriter::new(File::create(out_dir.join(METRICS_FILE))?), &frames)?;
    let summary = metrics_summary(&frames, SUMMARY_WINDOW)?;
    let mut out = BufWriter::new(File::create(out_dir.join(SUMMARY_FILE))?);
    serde_json::to_writer_pretty(&mut out, &summary)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(summary)
}
