//! Constellation geometry: circular-orbit propagation, earth-fixed sites,
//! visibility and the law-of-cosines off-axis angles.
//!
//! The earth is a sphere and orbits are circular with no perturbations.
//! Satellite positions are produced in an earth-centered earth-fixed frame,
//! so earth rotation is applied after the inertial propagation.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean equatorial earth radius (m).
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;
/// Earth gravitational parameter (m³/s²).
pub const GM_EARTH: f64 = 3.986_004_418e14;
/// Sidereal rotation rate (rad/s).
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_9e-5;

/// Tolerance on the arccos argument before a triangle is declared degenerate.
const ACOS_TOLERANCE: f64 = 1e-9;

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// A Walker-delta shell of circular orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitShell {
    pub plane_count: u32,
    pub sats_per_plane: u32,
    pub altitude_m: f64,
    pub inclination_rad: f64,
    /// Argument of latitude of satellite 0 in plane 0 at t = 0.
    #[serde(default)]
    pub epoch0_phase: f64,
    /// Right ascension of the ascending node of plane 0.
    #[serde(default)]
    pub raan0_rad: f64,
    /// Walker phasing factor F: plane p is advanced by 2πF·p/(P·N).
    #[serde(default = "default_phasing")]
    pub phasing: u32,
}

fn default_phasing() -> u32 {
    1
}

impl OrbitShell {
    /// The 30 × 40 shell at 550 km and 53° used by the reference scenario.
    pub fn reference() -> Self {
        Self {
            plane_count: 30,
            sats_per_plane: 40,
            altitude_m: 550_000.0,
            inclination_rad: 53f64.to_radians(),
            epoch0_phase: 0.0,
            raan0_rad: 0.0,
            phasing: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.plane_count < 1 || self.sats_per_plane < 1 {
            return Err(Error::Config("orbit shell needs at least one plane and one satellite".into()));
        }
        if !(self.altitude_m > 0.0) {
            return Err(Error::Config(format!("orbit altitude must be positive, got {}", self.altitude_m)));
        }
        if !(0.0..=PI).contains(&self.inclination_rad) {
            return Err(Error::Config(format!("inclination must lie in [0, π], got {}", self.inclination_rad)));
        }
        Ok(())
    }

    pub fn satellite_count(&self) -> usize {
        self.plane_count as usize * self.sats_per_plane as usize
    }

    pub fn orbit_radius_m(&self) -> f64 {
        EARTH_RADIUS_M + self.altitude_m
    }

    /// Mean motion (rad/s).
    pub fn mean_motion(&self) -> f64 {
        (GM_EARTH / self.orbit_radius_m().powi(3)).sqrt()
    }

    pub fn orbital_period_s(&self) -> f64 {
        TAU / self.mean_motion()
    }

    /// Inertial (ECI) position of satellite `index` at `time_s`.
    pub fn inertial_position(&self, index: usize, time_s: f64) -> Vec3 {
        let planes = self.plane_count as usize;
        let per_plane = self.sats_per_plane as usize;
        let plane = index / per_plane;
        let slot = index % per_plane;
        let raan = self.raan0_rad + TAU * plane as f64 / planes as f64;
        let u = self.epoch0_phase
            + TAU * slot as f64 / per_plane as f64
            + TAU * self.phasing as f64 * plane as f64 / (planes * per_plane) as f64
            + self.mean_motion() * time_s;
        let r = self.orbit_radius_m();
        let (su, cu) = u.sin_cos();
        let (so, co) = raan.sin_cos();
        let (si, ci) = self.inclination_rad.sin_cos();
        [r * (co * cu - so * su * ci), r * (so * cu + co * su * ci), r * su * si]
    }

    /// Earth-fixed position of satellite `index` at `time_s`.
    pub fn position(&self, index: usize, time_s: f64) -> Vec3 {
        inertial_to_fixed(self.inertial_position(index, time_s), time_s)
    }
}

/// Rotates an inertial vector into the earth-fixed frame at `time_s`.
pub fn inertial_to_fixed(v: Vec3, time_s: f64) -> Vec3 {
    let (s, c) = (EARTH_ROTATION_RAD_S * time_s).sin_cos();
    [c * v[0] + s * v[1], -s * v[0] + c * v[1], v[2]]
}

/// Earth-fixed positions of every satellite in the shell at `time_s`.
pub fn propagate(shell: &OrbitShell, time_s: f64) -> Vec<Vec3> {
    (0..shell.satellite_count()).map(|i| shell.position(i, time_s)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteKind {
    BeamCell,
    ClusterCenter,
}

/// A point on the earth surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundSite {
    pub latitude_rad: f64,
    pub longitude_rad: f64,
    pub kind: SiteKind,
}

impl GroundSite {
    pub fn new(latitude_rad: f64, longitude_rad: f64, kind: SiteKind) -> Result<Self> {
        if latitude_rad.abs() > PI / 2.0 + 1e-12 || longitude_rad.abs() > PI + 1e-12 {
            return Err(Error::Config(format!(
                "site ({latitude_rad}, {longitude_rad}) rad is outside the valid lat/lon range"
            )));
        }
        Ok(Self { latitude_rad, longitude_rad, kind })
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64, kind: SiteKind) -> Result<Self> {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians(), kind)
    }

    pub fn position(&self) -> Vec3 {
        let (sl, cl) = self.latitude_rad.sin_cos();
        let (so, co) = self.longitude_rad.sin_cos();
        [EARTH_RADIUS_M * cl * co, EARTH_RADIUS_M * cl * so, EARTH_RADIUS_M * sl]
    }

    /// Moves the site by local east/north offsets (m) on the sphere.
    pub fn offset(&self, east_m: f64, north_m: f64, kind: SiteKind) -> Result<Self> {
        let lat = self.latitude_rad + north_m / EARTH_RADIUS_M;
        let lon = self.longitude_rad + east_m / (EARTH_RADIUS_M * lat.cos());
        Self::new(lat, wrap_pi(lon), kind)
    }
}

fn wrap_pi(a: f64) -> f64 {
    let mut x = (a + PI).rem_euclid(TAU) - PI;
    if x < -PI {
        x += TAU;
    }
    x
}

/// Elevation of a point `target` above the local horizon of `site_pos`.
pub fn elevation(site_pos: Vec3, target: Vec3) -> f64 {
    let los = sub(target, site_pos);
    let up = norm(site_pos);
    let s = dot(los, site_pos) / (norm(los) * up);
    s.clamp(-1.0, 1.0).asin()
}

fn law_of_cosines_angle(adj_a: f64, adj_b: f64, opposite: f64) -> Result<f64> {
    if !(adj_a > 0.0 && adj_b > 0.0 && opposite >= 0.0) {
        return Err(Error::Domain(format!("off-axis angle needs positive sides, got ({adj_a}, {adj_b}, {opposite})")));
    }
    let arg = (adj_a * adj_a + adj_b * adj_b - opposite * opposite) / (2.0 * adj_a * adj_b);
    if !(-1.0 - ACOS_TOLERANCE..=1.0 + ACOS_TOLERANCE).contains(&arg) {
        return Err(Error::Domain(format!("degenerate triangle ({adj_a}, {adj_b}, {opposite}): cosine {arg}")));
    }
    Ok(arg.clamp(-1.0, 1.0).acos())
}

/// Off-axis angle at the transmitting satellite between the boresight
/// towards its own cell and the direction of a victim cell.
///
/// `d_sc` and `d_sc2` are the satellite's distances to the two cells and
/// `d_cc2` is the distance between the cell centers.
pub fn off_axis_angle_tx(d_sc: f64, d_sc2: f64, d_cc2: f64) -> Result<f64> {
    law_of_cosines_angle(d_sc, d_sc2, d_cc2)
}

/// Off-axis angle at a receiving cell between its serving satellite and an
/// interfering satellite. `d_ss2` is the inter-satellite distance.
pub fn off_axis_angle_rx(d_sc: f64, d_s2c: f64, d_ss2: f64) -> Result<f64> {
    law_of_cosines_angle(d_sc, d_s2c, d_ss2)
}

/// Angle at `vertex` between the directions to `a` and `b`, computed from
/// the three pairwise distances.
pub fn angle_at(vertex: Vec3, a: Vec3, b: Vec3) -> Result<f64> {
    law_of_cosines_angle(distance(vertex, a), distance(vertex, b), distance(a, b))
}

/// Geometry of every satellite against every beam cell for one epoch.
///
/// Matrices are satellite-major: entry `(s, c)` lives at `s * cells + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationSnapshot {
    pub epoch: u64,
    pub time_s: f64,
    pub min_elevation_rad: f64,
    pub sat_positions: Vec<Vec3>,
    pub cell_positions: Vec<Vec3>,
    pub cluster_positions: Vec<Vec3>,
    elevation: Vec<f64>,
    visible: Vec<bool>,
    cell_distance: Vec<f64>,
}

impl ConstellationSnapshot {
    pub fn satellite_count(&self) -> usize {
        self.sat_positions.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cell_positions.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_positions.len()
    }

    pub fn elevation(&self, sat: usize, cell: usize) -> f64 {
        self.elevation[sat * self.cell_count() + cell]
    }

    pub fn is_visible(&self, sat: usize, cell: usize) -> bool {
        self.visible[sat * self.cell_count() + cell]
    }

    pub fn distance_sat_cell(&self, sat: usize, cell: usize) -> f64 {
        self.cell_distance[sat * self.cell_count() + cell]
    }

    pub fn distance_sat_cluster(&self, sat: usize, cluster: usize) -> f64 {
        distance(self.sat_positions[sat], self.cluster_positions[cluster])
    }

    pub fn distance_cells(&self, a: usize, b: usize) -> f64 {
        distance(self.cell_positions[a], self.cell_positions[b])
    }

    pub fn distance_sats(&self, a: usize, b: usize) -> f64 {
        distance(self.sat_positions[a], self.sat_positions[b])
    }

    /// Satellites visible from `cell`, in ascending id order.
    pub fn visible_satellites(&self, cell: usize) -> Vec<usize> {
        (0..self.satellite_count()).filter(|&s| self.is_visible(s, cell)).collect()
    }

    /// Satellites visible from every cell, in ascending id order.
    pub fn commonly_visible(&self) -> Vec<usize> {
        (0..self.satellite_count()).filter(|&s| (0..self.cell_count()).all(|c| self.is_visible(s, c))).collect()
    }

    /// Number of satellites visible from `cell` (the S_c of the dynamic
    /// inter-beam threshold).
    pub fn visible_count(&self, cell: usize) -> usize {
        (0..self.satellite_count()).filter(|&s| self.is_visible(s, cell)).count()
    }
}

/// Builds the snapshot of epoch `epoch` (1-based); the snapshot time is
/// `(epoch − 1) · epoch_duration_s`.
pub fn build_snapshot(
    shell: &OrbitShell,
    cells: &[GroundSite],
    clusters: &[GroundSite],
    epoch: u64,
    epoch_duration_s: f64,
    min_elevation_rad: f64,
) -> Result<ConstellationSnapshot> {
    if epoch < 1 {
        return Err(Error::Config("epochs are numbered from 1".into()));
    }
    let time_s = (epoch - 1) as f64 * epoch_duration_s;
    let sat_positions = propagate(shell, time_s);
    Ok(snapshot_from_positions(
        epoch,
        time_s,
        sat_positions,
        cells.iter().map(GroundSite::position).collect(),
        clusters.iter().map(GroundSite::position).collect(),
        min_elevation_rad,
    ))
}

/// Assembles a snapshot from explicit earth-fixed positions. Used for
/// hand-built topologies as well as by [`build_snapshot`].
pub fn snapshot_from_positions(
    epoch: u64,
    time_s: f64,
    sat_positions: Vec<Vec3>,
    cell_positions: Vec<Vec3>,
    cluster_positions: Vec<Vec3>,
    min_elevation_rad: f64,
) -> ConstellationSnapshot {
    let cells = cell_positions.len();
    let mut elevation_m = Vec::with_capacity(sat_positions.len() * cells);
    let mut visible = Vec::with_capacity(sat_positions.len() * cells);
    let mut cell_distance = Vec::with_capacity(sat_positions.len() * cells);
    for &sat in &sat_positions {
        for &cell in &cell_positions {
            let el = elevation(cell, sat);
            elevation_m.push(el);
            visible.push(el >= min_elevation_rad);
            cell_distance.push(distance(sat, cell));
        }
    }
    ConstellationSnapshot {
        epoch,
        time_s,
        min_elevation_rad,
        sat_positions,
        cell_positions,
        cluster_positions,
        elevation: elevation_m,
        visible,
        cell_distance,
    }
}

/// Seconds until satellite `sat` drops below `min_elevation_rad` as seen
/// from `site`, searched forward from `time_s` in `step_s` increments up to
/// `horizon_s`. Returns 0 if it is not visible at `time_s`.
pub fn remaining_visibility_s(
    shell: &OrbitShell,
    sat: usize,
    site: Vec3,
    time_s: f64,
    min_elevation_rad: f64,
    step_s: f64,
    horizon_s: f64,
) -> f64 {
    let mut dt = 0.0;
    while dt <= horizon_s {
        if elevation(site, shell.position(sat, time_s + dt)) < min_elevation_rad {
            return dt;
        }
        dt += step_s;
    }
    horizon_s
}

/// Hexagonal grid of beam cells: `rows × cols` centers spaced `spacing_m`
/// apart, odd rows shifted east by half a spacing, rows stacked northward
/// from the `origin` cell.
pub fn hex_cell_layout(origin: GroundSite, rows: u32, cols: u32, spacing_m: f64) -> Result<Vec<GroundSite>> {
    let row_step = spacing_m * 3f64.sqrt() / 2.0;
    let mut cells = Vec::with_capacity((rows * cols) as usize);
    for r in 0..rows {
        for c in 0..cols {
            let east = c as f64 * spacing_m + if r % 2 == 1 { spacing_m / 2.0 } else { 0.0 };
            let north = r as f64 * row_step;
            cells.push(origin.offset(east, north, SiteKind::BeamCell)?);
        }
    }
    Ok(cells)
}
