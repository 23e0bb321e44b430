//! Independent checker for one epoch's decisions. It re-derives everything
//! from the decision itself and shares only the link formulas with the
//! decision-makers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::beamhop::SlotSchedule;
use crate::error::Result;
use crate::geometry::ConstellationSnapshot;
use crate::linkbudget::{db_to_linear, terrestrial_contribution, terrestrial_inr, ConflictSet, LinkContext};
use crate::spectrum::ShareVar;

/// Decisions of one epoch: serving satellites `x`, beam schedule `y` and
/// terrestrial-band occupancy `z` (the variables set to 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochDecision {
    pub epoch: u64,
    pub serving: Vec<usize>,
    pub schedule: SlotSchedule,
    pub sharing: Vec<ShareVar>,
    pub mandatory_cells: usize,
    pub rebalanced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// Wrong number of cells or slots, or an index out of range.
    Shape,
    /// A cell served by a satellite below its elevation mask.
    Visibility,
    /// A cell lit by more than one beam in a slot.
    OneBeamPerCell,
    /// One beam of a satellite pointed at more than one cell in a slot.
    OneCellPerBeam,
    /// More beams than a satellite carries, or a beam index out of range.
    BeamBudget,
    /// Two conflicting cells lit on co-polarized beams in the same slot.
    InterBeamConflict,
    /// A beam from a satellite other than the cell's serving satellite.
    ServingMismatch,
    /// The terrestrial band used on a link that is not lit in that slot.
    SharingWithoutBeam,
    /// A cluster interfered in more slots than its load allows.
    TerrestrialBudget,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub epoch: u64,
    pub slot: Option<usize>,
    pub constraint: Constraint,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.slot {
            Some(t) => write!(f, "epoch {} slot {t}: {}: {}", self.epoch, self.constraint, self.detail),
            None => write!(f, "epoch {}: {}: {}", self.epoch, self.constraint, self.detail),
        }
    }
}

/// Inputs the checker needs besides the decision.
pub struct ValidationContext<'a> {
    pub snapshot: &'a ConstellationSnapshot,
    pub link: LinkContext<'a>,
    pub conflicts: &'a ConflictSet,
    pub budgets: &'a [usize],
    pub beams_per_satellite: usize,
    pub slots: usize,
}

/// Returns every violated constraint; an empty report means the decision is valid.
pub fn validate_decision(d: &EpochDecision, ctx: &ValidationContext<'_>) -> Result<Vec<Violation>> {
    let mut out = Vec::new();
    let mut report = |slot: Option<usize>, constraint: Constraint, detail: String| {
        out.push(Violation { epoch: d.epoch, slot, constraint, detail });
    };
    let snap = ctx.snapshot;
    let cells = snap.cell_count();
    let sats = snap.satellite_count();
    let beams = ctx.beams_per_satellite;
    let radio = ctx.link.radio;

    if d.serving.len() != cells {
        report(None, Constraint::Shape, format!("{} serving entries for {cells} cells", d.serving.len()));
        return Ok(out);
    }
    for (c, &s) in d.serving.iter().enumerate() {
        if s >= sats {
            report(None, Constraint::Shape, format!("cell {c} served by unknown satellite {s}"));
        } else if !snap.is_visible(s, c) {
            report(None, Constraint::Visibility, format!("cell {c} served by satellite {s} below the mask"));
        }
    }
    if d.schedule.slots.len() != ctx.slots {
        report(None, Constraint::Shape, format!("{} slots scheduled, expected {}", d.schedule.slots.len(), ctx.slots));
    }

    let mut lit: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); ctx.slots.max(d.schedule.slots.len())];
    for (t, links) in d.schedule.slots.iter().enumerate() {
        let mut per_cell: BTreeMap<usize, usize> = BTreeMap::new();
        let mut per_beam: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        let mut per_sat: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        let mut valid = Vec::new();
        for l in links {
            if l.cell >= cells || l.sat >= sats {
                report(Some(t), Constraint::Shape, format!("link {l:?} out of range"));
                continue;
            }
            if l.beam >= beams {
                report(Some(t), Constraint::BeamBudget, format!("satellite {} beam {} of {beams}", l.sat, l.beam));
            }
            if d.serving[l.cell] != l.sat {
                report(
                    Some(t),
                    Constraint::ServingMismatch,
                    format!("cell {} lit by satellite {} but served by {}", l.cell, l.sat, d.serving[l.cell]),
                );
            }
            *per_cell.entry(l.cell).or_default() += 1;
            per_beam.entry((l.sat, l.beam)).or_default().push(l.cell);
            per_sat.entry(l.sat).or_default().insert(l.beam);
            lit[t].insert((l.sat, l.cell));
            valid.push(*l);
        }
        for (c, n) in per_cell {
            if n > 1 {
                report(Some(t), Constraint::OneBeamPerCell, format!("cell {c} lit by {n} beams"));
            }
        }
        for ((s, b), list) in per_beam {
            if list.len() > 1 {
                report(Some(t), Constraint::OneCellPerBeam, format!("satellite {s} beam {b} serves cells {list:?}"));
            }
        }
        for (s, used) in per_sat {
            if used.len() > beams {
                report(Some(t), Constraint::BeamBudget, format!("satellite {s} lights {} beams", used.len()));
            }
        }
        for (i, a) in valid.iter().enumerate() {
            for b in &valid[i + 1..] {
                if a.cell != b.cell
                    && ctx.conflicts.contains(a.cell, b.cell)
                    && radio.polarization_of(a.beam) == radio.polarization_of(b.beam)
                {
                    report(
                        Some(t),
                        Constraint::InterBeamConflict,
                        format!("cells {} and {} share a polarization", a.cell, b.cell),
                    );
                }
            }
        }
    }

    let mut shared_by_slot: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for v in &d.sharing {
        if v.slot >= lit.len() || !lit[v.slot].contains(&(v.sat, v.cell)) {
            report(
                Some(v.slot),
                Constraint::SharingWithoutBeam,
                format!("cell {} uses the terrestrial band from satellite {} while unlit", v.cell, v.sat),
            );
            continue;
        }
        shared_by_slot.entry(v.slot).or_default().push((v.sat, v.cell));
    }
    let clusters = snap.cluster_count();
    if ctx.budgets.len() != clusters {
        report(None, Constraint::Shape, format!("{} budgets for {clusters} clusters", ctx.budgets.len()));
        return Ok(out);
    }
    let threshold = db_to_linear(radio.inr_terr_db);
    let mut columns: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    let mut interfered = vec![0usize; clusters];
    for active in shared_by_slot.values() {
        let mut agg = vec![0.0; clusters];
        for &(s, c) in active {
            if !columns.contains_key(&(s, c)) {
                let col =
                    (0..clusters).map(|j| terrestrial_contribution(&ctx.link, j, s, c)).collect::<Result<Vec<_>>>()?;
                columns.insert((s, c), col);
            }
            for (a, x) in agg.iter_mut().zip(&columns[&(s, c)]) {
                *a += x;
            }
        }
        for (j, a) in agg.iter().enumerate() {
            if terrestrial_inr(&ctx.link, *a) > threshold {
                interfered[j] += 1;
            }
        }
    }
    for (j, (&n, &budget)) in interfered.iter().zip(ctx.budgets).enumerate() {
        if n > budget {
            report(
                None,
                Constraint::TerrestrialBudget,
                format!("cluster {j} interfered in {n} slots, budget {budget}"),
            );
        }
    }
    Ok(out)
}
