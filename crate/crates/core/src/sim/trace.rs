//! Line-delimited JSON trace of a run: a header with the full scenario
//! followed by one record per epoch.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::build_snapshot;
use crate::linkbudget::{conflict_pairs, LinkContext};
use crate::spectrum::cluster_budget;

use super::config::ScenarioConfig;
use super::engine::cluster_loads;
use super::scenario::build_layout;
use super::validate::{validate_decision, EpochDecision, ValidationContext, Violation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceRecord {
    Header { config: Box<ScenarioConfig> },
    Epoch(EpochDecision),
}

pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, config: &ScenarioConfig) -> Result<Self> {
        write_line(&mut out, &TraceRecord::Header { config: Box::new(config.clone()) })?;
        Ok(Self { out })
    }

    pub fn epoch(&mut self, decision: &EpochDecision) -> Result<()> {
        write_line(&mut self.out, &TraceRecord::Epoch(decision.clone()))
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

fn write_line<W: Write>(out: &mut W, record: &TraceRecord) -> Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Parses a trace; blank lines are skipped.
pub fn read_trace<R: BufRead>(reader: R) -> Result<Vec<TraceRecord>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Trace(format!("line {}: {e}", i + 1)))?;
        records.push(record);
    }
    Ok(records)
}

/// Replays a trace through the constraint checker, rebuilding geometry,
/// conflict sets and cluster budgets from the header configuration. An
/// empty trace has no violations.
pub fn validate_trace(records: &[TraceRecord]) -> Result<Vec<Violation>> {
    let mut iter = records.iter();
    let config = match iter.next() {
        None => return Ok(Vec::new()),
        Some(TraceRecord::Header { config }) => {
            let mut cfg = (**config).clone();
            cfg.validate()?;
            cfg
        }
        Some(TraceRecord::Epoch(_)) => return Err(Error::Trace("trace does not start with a header".into())),
    };
    let layout = build_layout(&config.layout, config.seed)?;
    let targets = vec![config.target_snr_db; config.cell_count()];
    let mut violations = Vec::new();
    for record in iter {
        let TraceRecord::Epoch(decision) = record else {
            return Err(Error::Trace("header repeated inside the trace".into()));
        };
        if decision.epoch < 1 {
            return Err(Error::Trace("epoch records are numbered from 1".into()));
        }
        let snap = build_snapshot(
            &config.orbit,
            &layout.cells,
            &layout.clusters,
            decision.epoch,
            config.epoch_duration_s,
            config.min_elevation_deg.to_radians(),
        )?;
        let link = LinkContext::new(&snap, &config.radio, &targets);
        let serving_ok =
            decision.serving.len() == snap.cell_count() && decision.serving.iter().all(|&s| s < snap.satellite_count());
        let conflicts = if serving_ok {
            conflict_pairs(&link, &decision.serving, config.beams_per_satellite)?
        } else {
            crate::linkbudget::ConflictSet::new()
        };
        let budgets: Vec<usize> =
            cluster_loads(&config, decision.epoch).iter().map(|&l| cluster_budget(config.slots_per_epoch, l)).collect();
        let ctx = ValidationContext {
            snapshot: &snap,
            link,
            conflicts: &conflicts,
            budgets: &budgets,
            beams_per_satellite: config.beams_per_satellite,
            slots: config.slots_per_epoch,
        };
        violations.extend(validate_decision(decision, &ctx)?);
    }
    Ok(violations)
}
