use std::io::Write;
use std::time::Instant;

use leobeam::beamhop::SlotSchedule;
use leobeam::geometry::{snapshot_from_positions, GroundSite, SiteKind, Vec3};
use leobeam::linkbudget::{BeamLink, ConflictSet, LinkContext, RadioConfig};
use leobeam::sim::engine::{METRICS_FILE, SUMMARY_FILE, TRACE_FILE};
use leobeam::sim::metrics::read_metrics_csv;
use leobeam::sim::{
    read_trace, run, run_to_dir, validate_decision, validate_trace, Constraint, EpochDecision, ScenarioConfig,
    SharePolicy, TraceRecord, ValidationContext,
};
use leobeam::spectrum::ShareVar;
use leobeam::Error;

fn short(epochs: u64) -> ScenarioConfig {
    ScenarioConfig { epochs, ..ScenarioConfig::reference() }
}

#[test]
fn scenario_file_matches_reference() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/default.toml")).unwrap();
    let from_file = ScenarioConfig::from_toml(&text, &[]).unwrap();
    let mut reference = ScenarioConfig::reference();
    reference.validate().unwrap();
    assert_eq!(from_file.to_toml(), reference.to_toml());
}

#[test]
fn identical_configs_give_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    run_to_dir(short(6), &dir.path().join("a")).unwrap();
    run_to_dir(short(6), &dir.path().join("b")).unwrap();
    let a = std::fs::read(dir.path().join("a").join(METRICS_FILE)).unwrap();
    let b = std::fs::read(dir.path().join("b").join(METRICS_FILE)).unwrap();
    assert_eq!(a, b);
    let c = std::fs::read(dir.path().join("a").join(TRACE_FILE)).unwrap();
    let d = std::fs::read(dir.path().join("b").join(TRACE_FILE)).unwrap();
    assert_eq!(c, d);
}

#[test]
fn zero_arrivals_keep_every_queue_empty() {
    let mut cfg = short(5);
    cfg.arrivals.mean_total_rate_bps = 0.0;
    let frames = run(cfg).unwrap();
    assert_eq!(frames.len(), 5);
    for f in &frames {
        assert_eq!(f.mean_queue_bits, 0.0);
        assert_eq!(f.served_w1_bits + f.served_w2_bits, 0.0);
        assert_eq!(f.p0_term, 0.0);
    }
}

#[test]
fn run_writes_three_files_and_its_trace_validates() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_to_dir(short(4), dir.path()).unwrap();
    assert_eq!(summary.epochs, 4);
    for name in [METRICS_FILE, TRACE_FILE, SUMMARY_FILE] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let frames = read_metrics_csv(std::fs::File::open(dir.path().join(METRICS_FILE)).unwrap()).unwrap();
    assert_eq!(frames.len(), 4);
    let records =
        read_trace(std::io::BufReader::new(std::fs::File::open(dir.path().join(TRACE_FILE)).unwrap())).unwrap();
    assert_eq!(records.len(), 5);
    assert!(validate_trace(&records).unwrap().is_empty());
}

fn first_epoch(records: &mut [TraceRecord]) -> &mut EpochDecision {
    records
        .iter_mut()
        .find_map(|r| match r {
            TraceRecord::Epoch(d) => Some(d),
            TraceRecord::Header { .. } => None,
        })
        .unwrap()
}

#[test]
fn corrupted_trace_records_are_caught() {
    let mut cfg = short(2);
    cfg.policy.sharing = SharePolicy::None;
    let dir = tempfile::tempdir().unwrap();
    run_to_dir(cfg, dir.path()).unwrap();
    let path = dir.path().join(TRACE_FILE);
    let records = read_trace(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();

    // Point a second cell at an already-used beam of the same satellite.
    let mut bad = records.clone();
    let d = first_epoch(&mut bad);
    let slot = d.schedule.slots.iter().position(|s| s.len() >= 2).unwrap();
    let first = d.schedule.slots[slot][0];
    let other = d.schedule.slots[slot].iter().position(|l| l.sat == first.sat && l.cell != first.cell).unwrap();
    d.schedule.slots[slot][other].beam = first.beam;
    let violations = validate_trace(&bad).unwrap();
    assert!(violations.iter().any(|v| v.constraint == Constraint::OneCellPerBeam && v.slot == Some(slot)));

    // A record that does not parse.
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("{\"type\":\"epoch\",\"epoch\":\n");
    let err = read_trace(text.as_bytes()).unwrap_err();
    assert!(matches!(err, Error::Trace(ref m) if m.starts_with("line 4")), "{err}");

    // Epoch records without a header.
    assert!(matches!(validate_trace(&records[1..]), Err(Error::Trace(_))));
    assert!(validate_trace(&[]).unwrap().is_empty());
}

/// Two satellites 550 km above cells 0 and 2 of a row of four cells, with
/// one terrestrial cluster on top of cell 0.
fn toy_context() -> (leobeam::geometry::ConstellationSnapshot, RadioConfig) {
    let site = |lon: f64| GroundSite::from_degrees(0.0, lon, SiteKind::BeamCell).unwrap().position();
    let above = |p: Vec3| p.map(|x| x * (1.0 + 550e3 / 6_371_000.0));
    let cells: Vec<Vec3> = (0..4).map(|c| site(c as f64 * 0.3)).collect();
    let sats = vec![above(cells[0]), above(cells[2])];
    let snap = snapshot_from_positions(1, 0.0, sats, cells.clone(), vec![cells[0]], 10f64.to_radians());
    (snap, RadioConfig::reference())
}

fn toy_decision(schedule: Vec<Vec<BeamLink>>, sharing: Vec<ShareVar>) -> EpochDecision {
    EpochDecision {
        epoch: 1,
        serving: vec![0, 0, 1, 1],
        schedule: SlotSchedule { slots: schedule },
        sharing,
        mandatory_cells: 0,
        rebalanced: false,
    }
}

fn link(sat: usize, cell: usize, beam: usize) -> BeamLink {
    BeamLink { sat, cell, beam }
}

fn check(d: &EpochDecision, conflicts: &ConflictSet, budgets: &[usize]) -> Vec<Constraint> {
    let (snap, radio) = toy_context();
    let targets = vec![12.0; 4];
    let ctx = ValidationContext {
        snapshot: &snap,
        link: LinkContext::new(&snap, &radio, &targets),
        conflicts,
        budgets,
        beams_per_satellite: 2,
        slots: d.schedule.slots.len(),
    };
    validate_decision(d, &ctx).unwrap().into_iter().map(|v| v.constraint).collect()
}

#[test]
fn valid_hopping_pattern_has_no_violations() {
    // Cells 0 and 2 conflict, so they only share a slot on opposite polarizations.
    let conflicts = ConflictSet::from_pairs([(0, 2)]);
    let d = toy_decision(
        vec![
            vec![link(0, 0, 0), link(0, 1, 1), link(1, 2, 1), link(1, 3, 0)],
            vec![link(0, 1, 0), link(1, 2, 0)],
            vec![link(0, 0, 1), link(1, 3, 1)],
        ],
        vec![],
    );
    assert!(check(&d, &conflicts, &[3]).is_empty());
}

#[test]
fn one_beam_on_two_cells_is_reported() {
    let d = toy_decision(vec![vec![link(0, 0, 0), link(0, 1, 0)]], vec![]);
    assert_eq!(check(&d, &ConflictSet::new(), &[1]), vec![Constraint::OneCellPerBeam]);
}

#[test]
fn co_polarized_conflicting_cells_are_reported() {
    let d = toy_decision(vec![vec![link(0, 0, 0), link(1, 2, 0)]], vec![]);
    assert_eq!(check(&d, &ConflictSet::from_pairs([(0, 2)]), &[1]), vec![Constraint::InterBeamConflict]);
}

#[test]
fn exceeding_the_cluster_budget_is_reported() {
    let d = toy_decision(
        vec![vec![link(0, 0, 0)], vec![link(0, 0, 0)]],
        vec![ShareVar { slot: 0, sat: 0, cell: 0 }, ShareVar { slot: 1, sat: 0, cell: 0 }],
    );
    assert!(check(&d, &ConflictSet::new(), &[2]).is_empty());
    assert_eq!(check(&d, &ConflictSet::new(), &[1]), vec![Constraint::TerrestrialBudget]);
}

#[test]
fn sharing_on_an_unlit_link_is_reported() {
    let d = toy_decision(vec![vec![link(0, 0, 0)]], vec![ShareVar { slot: 0, sat: 0, cell: 1 }]);
    assert_eq!(check(&d, &ConflictSet::new(), &[1]), vec![Constraint::SharingWithoutBeam]);
}

#[test]
fn serving_and_beam_budget_violations_are_reported() {
    let d = toy_decision(vec![vec![link(1, 0, 0), link(0, 1, 2)]], vec![]);
    let found = check(&d, &ConflictSet::new(), &[1]);
    assert!(found.contains(&Constraint::ServingMismatch));
    assert!(found.contains(&Constraint::BeamBudget));
}

fn timed_epochs(rows: u32, cols: u32) -> f64 {
    let mut cfg = short(6);
    cfg.layout.rows = rows;
    cfg.layout.cols = cols;
    // Same total offered load, so both sizes keep the sharing stage busy.
    cfg.arrivals.weights = vec![1.0; (rows * cols) as usize];
    (0..2)
        .map(|_| {
            let start = Instant::now();
            run(cfg.clone()).unwrap();
            start.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn doubling_cells_costs_less_than_five_times() {
    let ten = timed_epochs(2, 5);
    let twenty = timed_epochs(4, 5);
    let ratio = twenty / ten;
    writeln!(std::io::stderr(), "epoch time C=10 {ten:.3}s, C=20 {twenty:.3}s, ratio {ratio:.2}").unwrap();
    assert!(ratio < 5.0, "ratio {ratio}");
}
