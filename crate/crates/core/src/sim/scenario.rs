//! Ground layout and the per-epoch candidate satellite sets.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{distance, ConstellationSnapshot, GroundSite, SiteKind};
use crate::handover::Candidates;
use crate::rng::{stream, Purpose};

use super::config::{LayoutConfig, PoolConfig, PoolMode};

/// Cells and terrestrial clusters of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundLayout {
    pub cells: Vec<GroundSite>,
    pub clusters: Vec<GroundSite>,
    /// Cell each cluster was scattered around.
    pub cluster_home: Vec<usize>,
}

const PLACEMENT_ATTEMPTS: usize = 10_000;

/// Hex grid of cells plus `clusters_per_cell` clusters per cell, placed
/// uniformly in a disk around the cell center with rejection of points
/// closer than the minimum separation to any earlier cluster.
pub fn build_layout(cfg: &LayoutConfig, seed: u64) -> Result<GroundLayout> {
    let origin = GroundSite::from_degrees(cfg.origin_lat_deg, cfg.origin_lon_deg, SiteKind::BeamCell)?;
    let cells = crate::geometry::hex_cell_layout(origin, cfg.rows, cfg.cols, cfg.cell_spacing_m)?;
    let mut rng = stream(seed, 0, Purpose::Layout);
    let mut clusters: Vec<GroundSite> = Vec::new();
    let mut positions = Vec::new();
    let mut cluster_home = Vec::new();
    for (home, cell) in cells.iter().enumerate() {
        for _ in 0..cfg.clusters_per_cell {
            let mut placed = false;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let r = cfg.cluster_radius_m * rng.gen::<f64>().sqrt();
                let phi = rng.gen::<f64>() * std::f64::consts::TAU;
                let site = cell.offset(r * phi.cos(), r * phi.sin(), SiteKind::ClusterCenter)?;
                let p = site.position();
                if positions.iter().all(|&q| distance(p, q) >= cfg.cluster_min_separation_m) {
                    positions.push(p);
                    clusters.push(site);
                    cluster_home.push(home);
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::Config(format!(
                    "cannot place {} clusters around cell {home} with {} m separation",
                    cfg.clusters_per_cell, cfg.cluster_min_separation_m
                )));
            }
        }
    }
    Ok(GroundLayout { cells, clusters, cluster_home })
}

/// Sticky pool of satellites shared by all cells. Members stay while every
/// cell still sees them; vacancies go to the satellite covering the most
/// cells, then the highest mean elevation, then the lowest id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SatellitePool {
    members: Vec<usize>,
}

impl SatellitePool {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn update(&mut self, snap: &ConstellationSnapshot, size: usize) {
        let cells = snap.cell_count();
        let coverage = |s: usize| (0..cells).filter(|&c| snap.is_visible(s, c)).count();
        self.members.retain(|&s| coverage(s) == cells);
        if self.members.len() >= size {
            return;
        }
        let mut ranked: Vec<(usize, f64, usize)> = (0..snap.satellite_count())
            .filter(|s| !self.members.contains(s))
            .filter_map(|s| {
                let n = coverage(s);
                (n > 0).then(|| (n, (0..cells).map(|c| snap.elevation(s, c)).sum::<f64>() / cells as f64, s))
            })
            .collect();
        ranked.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
        self.members.extend(ranked.into_iter().take(size - self.members.len()).map(|r| r.2));
        self.members.sort_unstable();
    }
}

/// Candidate satellites per cell. In shared mode a cell sees the pool
/// members visible to it, falling back to all its visible satellites when
/// none is. A cell with nothing visible makes the epoch infeasible.
pub fn candidates(snap: &ConstellationSnapshot, pool: &SatellitePool, cfg: &PoolConfig) -> Result<Candidates> {
    let per_cell = (0..snap.cell_count())
        .map(|c| {
            let mut list: Vec<usize> = match cfg.mode {
                PoolMode::Shared => pool.members().iter().copied().filter(|&s| snap.is_visible(s, c)).collect(),
                PoolMode::Full => Vec::new(),
            };
            if list.is_empty() {
                list = snap.visible_satellites(c);
            }
            if list.is_empty() {
                return Err(Error::Infeasible { epoch: snap.epoch, cell: c });
            }
            Ok(list)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Candidates::new(per_cell))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::snapshot_from_positions;

    #[test]
    fn layout_respects_radius_and_separation() {
        let cfg = LayoutConfig::default();
        let layout = build_layout(&cfg, 3).unwrap();
        assert_eq!(layout.cells.len(), 20);
        assert_eq!(layout.clusters.len(), 200);
        for (j, site) in layout.clusters.iter().enumerate() {
            let home = layout.cells[layout.cluster_home[j]].position();
            assert!(distance(site.position(), home) <= cfg.cluster_radius_m + 1.0);
            for other in &layout.clusters[..j] {
                assert!(distance(site.position(), other.position()) >= cfg.cluster_min_separation_m);
            }
        }
        assert_eq!(build_layout(&cfg, 3).unwrap(), layout);
    }

    #[test]
    fn impossible_separation_is_reported() {
        let cfg =
            LayoutConfig { cluster_radius_m: 1_000.0, cluster_min_separation_m: 5_000.0, ..LayoutConfig::default() };
        assert!(matches!(build_layout(&cfg, 1), Err(Error::Config(_))));
    }

    fn toy_snapshot(visible: &[&[usize]]) -> ConstellationSnapshot {
        // Satellites straight above (visible) or on the far side of the earth.
        let cells: Vec<_> = (0..visible.len())
            .map(|c| GroundSite::from_degrees(0.0, c as f64 * 0.1, SiteKind::BeamCell).unwrap().position())
            .collect();
        let sats = (0..3)
            .map(|s| {
                if visible.iter().any(|v| v.contains(&s)) {
                    let lon = visible.iter().position(|v| v.contains(&s)).unwrap() as f64 * 0.1;
                    GroundSite::from_degrees(0.0, lon, SiteKind::BeamCell).unwrap().position().map(|x| x * 1.1)
                } else {
                    [-8.0e6, 0.0, 0.0]
                }
            })
            .collect();
        snapshot_from_positions(1, 0.0, sats, cells, vec![], 10f64.to_radians())
    }

    #[test]
    fn pool_is_sticky_and_candidates_fall_back() {
        let snap = toy_snapshot(&[&[0, 1], &[0, 1]]);
        let mut pool = SatellitePool { members: vec![1] };
        pool.update(&snap, 2);
        assert_eq!(pool.members(), &[0, 1]);
        let cand = candidates(&snap, &pool, &PoolConfig::default()).unwrap();
        assert_eq!(cand.of_cell(0), &[0, 1]);

        let none = toy_snapshot(&[&[], &[]]);
        assert!(matches!(
            candidates(&none, &SatellitePool::default(), &PoolConfig::default()),
            Err(Error::Infeasible { cell: 0, .. })
        ));
        let full = candidates(&snap, &SatellitePool::default(), &PoolConfig { mode: PoolMode::Full, size: 2 }).unwrap();
        assert_eq!(full.of_cell(1), snap.visible_satellites(1).as_slice());
    }
}
