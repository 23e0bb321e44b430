//! Scenario configuration: one TOML document with a table per subsystem.
//! Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::OrbitShell;
use crate::handover::{HandoverConfig, HandoverPolicy};
use crate::linkbudget::RadioConfig;
use crate::spectrum::SparrowConfig;
use crate::traffic::{ArrivalModel, LyapunovConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub origin_lat_deg: f64,
    pub origin_lon_deg: f64,
    pub rows: u32,
    pub cols: u32,
    /// Distance between neighbouring cell centers.
    pub cell_spacing_m: f64,
    /// Nominal cell radius; informational, the grid uses the spacing.
    pub cell_radius_m: f64,
    pub clusters_per_cell: u32,
    /// Clusters are scattered uniformly within this distance of their cell center.
    pub cluster_radius_m: f64,
    pub cluster_min_separation_m: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            origin_lat_deg: 20.0,
            origin_lon_deg: 30.0,
            rows: 4,
            cols: 5,
            cell_spacing_m: 34_600.0,
            cell_radius_m: 34_600.0,
            clusters_per_cell: 10,
            cluster_radius_m: 50_000.0,
            cluster_min_separation_m: 10_000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadDrawMode {
    /// Drawn once for the whole run.
    Static,
    /// Redrawn every epoch.
    PerEpoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterLoadConfig {
    pub min: f64,
    pub max: f64,
    pub mode: LoadDrawMode,
}

impl Default for ClusterLoadConfig {
    fn default() -> Self {
        Self { min: 0.4, max: 0.6, mode: LoadDrawMode::PerEpoch }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    /// A small sticky set of satellites shared by all cells.
    Shared,
    /// Every visible satellite is a candidate.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolConfig {
    pub mode: PoolMode,
    pub size: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self { mode: PoolMode::Shared, size: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopPolicy {
    Proposed,
    GreedyHop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharePolicy {
    Proposed,
    GreedyShare,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub handover: HandoverPolicy,
    pub beamhop: HopPolicy,
    pub sharing: SharePolicy,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self { handover: HandoverPolicy::Proposed, beamhop: HopPolicy::Proposed, sharing: SharePolicy::Proposed }
    }
}

impl PolicyConfig {
    /// Applies `stage=name`, e.g. `handover=load_balance`.
    pub fn set(&mut self, stage: &str, name: &str) -> Result<()> {
        let bad = || Error::Config(format!("unknown policy {name:?} for stage {stage:?}"));
        match stage {
            "handover" => {
                self.handover = match name {
                    "proposed" => HandoverPolicy::Proposed,
                    "load_balance" => HandoverPolicy::LoadBalance,
                    "entropy_only" => HandoverPolicy::EntropyOnly,
                    _ => return Err(bad()),
                }
            }
            "beamhop" => {
                self.beamhop = match name {
                    "proposed" => HopPolicy::Proposed,
                    "greedy_hop" => HopPolicy::GreedyHop,
                    _ => return Err(bad()),
                }
            }
            "sharing" => {
                self.sharing = match name {
                    "proposed" => SharePolicy::Proposed,
                    "greedy_share" => SharePolicy::GreedyShare,
                    "none" => SharePolicy::None,
                    _ => return Err(bad()),
                }
            }
            _ => return Err(Error::Config(format!("unknown policy stage {stage:?}"))),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub epochs: u64,
    pub slots_per_epoch: usize,
    pub epoch_duration_s: f64,
    pub beams_per_satellite: usize,
    pub min_elevation_deg: f64,
    pub target_snr_db: f64,
    /// Multiply the load-balance term of the handover objective by V.
    pub scale_load_term_by_v: bool,
    /// Check every decision with the constraint validator while running.
    pub validate_decisions: bool,
    pub orbit: OrbitShell,
    pub layout: LayoutConfig,
    pub radio: RadioConfig,
    pub arrivals: ArrivalModel,
    pub lyapunov: LyapunovConfig,
    pub handover: HandoverConfig,
    pub sparrow: SparrowConfig,
    pub cluster_load: ClusterLoadConfig,
    pub pool: PoolConfig,
    pub policy: PolicyConfig,
}

impl ScenarioConfig {
    /// The reference scenario at the given total arrival rate.
    pub fn reference() -> Self {
        Self {
            seed: 1,
            epochs: 2000,
            slots_per_epoch: 200,
            epoch_duration_s: 0.2,
            beams_per_satellite: 4,
            min_elevation_deg: 35.0,
            target_snr_db: 12.0,
            scale_load_term_by_v: true,
            validate_decisions: true,
            orbit: OrbitShell::reference(),
            layout: LayoutConfig::default(),
            radio: RadioConfig::reference(),
            arrivals: ArrivalModel::reference(6.52e9),
            lyapunov: LyapunovConfig::default(),
            handover: HandoverConfig::default(),
            sparrow: SparrowConfig::default(),
            cluster_load: ClusterLoadConfig::default(),
            pool: PoolConfig::default(),
            policy: PolicyConfig::default(),
        }
    }

    pub fn cell_count(&self) -> usize {
        (self.layout.rows * self.layout.cols) as usize
    }

    pub fn validate(&mut self) -> Result<()> {
        if self.slots_per_epoch < 1 {
            return Err(Error::Config("slots_per_epoch must be at least 1".into()));
        }
        if !(self.epoch_duration_s > 0.0) {
            return Err(Error::Config("epoch_duration_s must be positive".into()));
        }
        if self.beams_per_satellite < 1 {
            return Err(Error::Config("beams_per_satellite must be at least 1".into()));
        }
        if !(0.0..90.0).contains(&self.min_elevation_deg) {
            return Err(Error::Config("min_elevation_deg must lie in [0, 90)".into()));
        }
        if self.layout.rows < 1 || self.layout.cols < 1 {
            return Err(Error::Config("layout needs at least one row and column".into()));
        }
        if !(self.layout.cell_spacing_m > 0.0 && self.layout.cluster_radius_m >= 0.0) {
            return Err(Error::Config("layout distances must be positive".into()));
        }
        let cl = &self.cluster_load;
        if !(0.0 <= cl.min && cl.min <= cl.max && cl.max <= 1.0) {
            return Err(Error::Config("cluster_load needs 0 ≤ min ≤ max ≤ 1".into()));
        }
        if self.pool.mode == PoolMode::Shared && self.pool.size < 1 {
            return Err(Error::Config("pool.size must be at least 1".into()));
        }
        if self.arrivals.weights.len() != self.cell_count() {
            return Err(Error::Config(format!(
                "arrivals.weights has {} entries for {} cells",
                self.arrivals.weights.len(),
                self.cell_count()
            )));
        }
        self.orbit.validate()?;
        self.radio.validate()?;
        self.arrivals.validate()?;
        self.lyapunov.validate()?;
        self.handover.validate()?;
        self.sparrow.validate()
    }

    /// Parses and validates a TOML scenario, applying dotted-key overrides
    /// (`key.path = value`, value in TOML syntax or a bare string) first.
    pub fn from_toml(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for (key, value) in overrides {
            apply_override(&mut doc, key, value)?;
        }
        let mut cfg: ScenarioConfig =
            ScenarioConfig::deserialize(toml::Value::Table(doc)).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Sets `path` (dot separated) in a TOML table. The key must already exist
/// unless its parent table exists, so typos fail at deserialization.
pub fn apply_override(doc: &mut toml::Table, path: &str, raw: &str) -> Result<()> {
    let value = parse_value(raw);
    let mut parts: Vec<&str> = path.split('.').collect();
    let last =
        parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Config(format!("empty override key {path:?}")))?;
    let mut table = doc;
    for part in parts {
        table = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {path:?}: {part:?} is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
