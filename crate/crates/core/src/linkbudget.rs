//! Antenna patterns, free-space channel gains, SNR/capacity arithmetic and
//! the two interference models: co-channel inter-beam interference and
//! satellite-to-terrestrial interference at cluster centers.
//!
//! Gains handled here are linear unless the name ends in `_db`. Pattern
//! attenuations are non-negative dB values subtracted from the peak gain.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_at, ConstellationSnapshot};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BOLTZMANN: f64 = 1.380_649e-23;

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Shape of the attenuation curve of an antenna.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatternProfile {
    /// `12·(θ/θ_3dB)²` dB, clipped at the floor.
    Parabolic,
    /// Piecewise-linear table of `(angle_rad, attenuation_db)` points with
    /// ascending angles; the last value extends to π.
    Tabulated { points: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainPattern {
    pub peak_gain_db: f64,
    pub half_power_beamwidth_rad: f64,
    pub floor_attenuation_db: f64,
    #[serde(default = "parabolic")]
    pub profile: PatternProfile,
}

fn parabolic() -> PatternProfile {
    PatternProfile::Parabolic
}

impl GainPattern {
    pub fn parabolic(peak_gain_db: f64, half_power_beamwidth_rad: f64, floor_attenuation_db: f64) -> Self {
        Self { peak_gain_db, half_power_beamwidth_rad, floor_attenuation_db, profile: PatternProfile::Parabolic }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_power_beamwidth_rad > 0.0) || !(self.floor_attenuation_db >= 0.0) {
            return Err(Error::Config("gain pattern needs a positive beamwidth and non-negative floor".into()));
        }
        if let PatternProfile::Tabulated { points } = &self.profile {
            if points.is_empty() || points[0].0 != 0.0 || points[0].1 != 0.0 {
                return Err(Error::Config("tabulated pattern must start at (0, 0)".into()));
            }
            if points.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
                return Err(Error::Config(
                    "tabulated pattern angles must ascend and attenuation must not decrease".into(),
                ));
            }
        }
        Ok(())
    }

    /// Attenuation (dB, ≥ 0) at off-axis angle `theta`.
    pub fn attenuation_db(&self, theta: f64) -> f64 {
        let theta = theta.abs().min(PI);
        let raw = match &self.profile {
            PatternProfile::Parabolic => 12.0 * (theta / self.half_power_beamwidth_rad).powi(2),
            PatternProfile::Tabulated { points } => interpolate(points, theta),
        };
        raw.min(self.floor_attenuation_db)
    }

    /// Linear attenuation factor in (0, 1].
    pub fn attenuation_linear(&self, theta: f64) -> f64 {
        db_to_linear(-self.attenuation_db(theta))
    }
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    match points.iter().position(|&(a, _)| a >= x) {
        None => points[points.len() - 1].1,
        Some(0) => points[0].1,
        Some(i) => {
            let (x0, y0) = points[i - 1];
            let (x1, y1) = points[i];
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    pub carrier_hz: f64,
    /// W1: exclusive satellite band.
    pub sat_bandwidth_hz: f64,
    /// W2: borrowed terrestrial band.
    pub terr_bandwidth_hz: f64,
    pub slot_duration_s: f64,
    /// Satellite transmit antenna (G_p^1 and its off-axis pattern).
    pub tx_pattern: GainPattern,
    /// Satellite-user receive antenna (G_p^2 and its off-axis pattern).
    pub rx_pattern: GainPattern,
    /// Terrestrial receiver peak gain G_p^g, applied without off-axis loss.
    pub terr_peak_gain_db: f64,
    #[serde(default = "default_boltzmann")]
    pub boltzmann: f64,
    pub rx_temperature_k: f64,
    /// I_s^th.
    pub inr_beam_db: f64,
    /// I_g^th.
    pub inr_terr_db: f64,
    pub polarization_count: u32,
    /// Isolation between orthogonal polarizations; `None` means perfect.
    #[serde(default)]
    pub cross_pol_isolation_db: Option<f64>,
}

fn default_boltzmann() -> f64 {
    BOLTZMANN
}

impl RadioConfig {
    /// Ka-band radio of the reference scenario.
    pub fn reference() -> Self {
        Self {
            carrier_hz: 20e9,
            sat_bandwidth_hz: 200e6,
            terr_bandwidth_hz: 80e6,
            slot_duration_s: 1e-3,
            tx_pattern: GainPattern::parabolic(38.5, 2f64.to_radians(), 30.0),
            rx_pattern: GainPattern::parabolic(10.0, 50f64.to_radians(), 20.0),
            terr_peak_gain_db: 0.0,
            boltzmann: BOLTZMANN,
            rx_temperature_k: 290.0,
            inr_beam_db: -5.0,
            inr_terr_db: -10.0,
            polarization_count: 2,
            cross_pol_isolation_db: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sat_bandwidth_hz > 0.0 && self.terr_bandwidth_hz > 0.0) {
            return Err(Error::Config("bandwidths must be positive".into()));
        }
        if !(self.slot_duration_s > 0.0) {
            return Err(Error::Config("slot duration must be positive".into()));
        }
        if !(1..=2).contains(&self.polarization_count) {
            return Err(Error::Config(format!("polarization_count must be 1 or 2, got {}", self.polarization_count)));
        }
        self.tx_pattern.validate()?;
        self.rx_pattern.validate()
    }

    /// G_p = G_p^1 · G_p^2 (linear).
    pub fn combined_peak_gain(&self) -> f64 {
        db_to_linear(self.tx_pattern.peak_gain_db + self.rx_pattern.peak_gain_db)
    }

    pub fn noise_power(&self, bandwidth_hz: f64) -> f64 {
        self.boltzmann * self.rx_temperature_k * bandwidth_hz
    }

    /// Polarization of beam `beam` under the round-robin beam plan.
    pub fn polarization_of(&self, beam: usize) -> usize {
        beam % self.polarization_count as usize
    }

    /// Linear coupling between two beams: 1 for co-polarized beams, the
    /// isolation factor for cross-polarized ones (0 when isolation is perfect).
    pub fn polarization_coupling(&self, beam_a: usize, beam_b: usize) -> f64 {
        if self.polarization_of(beam_a) == self.polarization_of(beam_b) {
            1.0
        } else {
            self.cross_pol_isolation_db.map_or(0.0, |iso| db_to_linear(-iso))
        }
    }
}

/// Free-space channel gain `(c / (4π d f))²`.
pub fn channel_gain(distance_m: f64, carrier_hz: f64) -> f64 {
    (SPEED_OF_LIGHT / (4.0 * PI * distance_m * carrier_hz)).powi(2)
}

/// Transmit power that makes the noise-limited SNR equal `target_snr_db`.
pub fn tx_power_for_target_snr(target_snr_db: f64, gain: f64, bandwidth_hz: f64, radio: &RadioConfig) -> f64 {
    if target_snr_db == f64::NEG_INFINITY {
        return 0.0;
    }
    db_to_linear(target_snr_db) * radio.noise_power(bandwidth_hz) / (radio.combined_peak_gain() * gain)
}

/// Noise-limited SNR (dB) of a link with transmit power `power_w`.
pub fn snr_db(power_w: f64, gain: f64, bandwidth_hz: f64, radio: &RadioConfig) -> f64 {
    linear_to_db(power_w * radio.combined_peak_gain() * gain) - linear_to_db(radio.noise_power(bandwidth_hz))
}

/// Bits delivered in one slot: `W · T_slot · log2(1 + snr)`.
pub fn slot_capacity_bits(bandwidth_hz: f64, slot_duration_s: f64, snr_linear: f64) -> f64 {
    bandwidth_hz * slot_duration_s * (1.0 + snr_linear).log2()
}

/// Per-slot capacity of a cell at its target SNR.
pub fn slot_rate_bits(bandwidth_hz: f64, radio: &RadioConfig, target_snr_db: f64) -> f64 {
    slot_capacity_bits(bandwidth_hz, radio.slot_duration_s, db_to_linear(target_snr_db))
}

/// A beam of satellite `sat` pointed at `cell`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BeamLink {
    pub sat: usize,
    pub cell: usize,
    pub beam: usize,
}

/// Read-only view of one epoch's geometry together with the radio setup and
/// per-cell target SNRs; everything needed to evaluate link quantities.
#[derive(Debug, Clone, Copy)]
pub struct LinkContext<'a> {
    pub snapshot: &'a ConstellationSnapshot,
    pub radio: &'a RadioConfig,
    pub target_snr_db: &'a [f64],
}

impl<'a> LinkContext<'a> {
    pub fn new(snapshot: &'a ConstellationSnapshot, radio: &'a RadioConfig, target_snr_db: &'a [f64]) -> Self {
        Self { snapshot, radio, target_snr_db }
    }

    pub fn gain_sat_cell(&self, sat: usize, cell: usize) -> f64 {
        channel_gain(self.snapshot.distance_sat_cell(sat, cell), self.radio.carrier_hz)
    }

    pub fn gain_sat_cluster(&self, sat: usize, cluster: usize) -> f64 {
        channel_gain(self.snapshot.distance_sat_cluster(sat, cluster), self.radio.carrier_hz)
    }

    /// P_{s,c}: power satellite `sat` spends on `cell` over `bandwidth_hz`.
    pub fn power(&self, sat: usize, cell: usize, bandwidth_hz: f64) -> f64 {
        tx_power_for_target_snr(self.target_snr_db[cell], self.gain_sat_cell(sat, cell), bandwidth_hz, self.radio)
    }

    /// Transmit-side attenuation (dB) of the beam of `sat` aimed at cell
    /// `boresight_cell`, towards the point `target`.
    fn tx_attenuation_towards(&self, sat: usize, boresight_cell: usize, target: crate::geometry::Vec3) -> Result<f64> {
        let snap = self.snapshot;
        let theta = angle_at(snap.sat_positions[sat], snap.cell_positions[boresight_cell], target)?;
        Ok(self.radio.tx_pattern.attenuation_db(theta))
    }

    /// Receive-side attenuation (dB) at `cell` whose antenna points at
    /// `serving`, for a signal arriving from `other`.
    fn rx_attenuation(&self, cell: usize, serving: usize, other: usize) -> Result<f64> {
        if serving == other {
            return Ok(0.0);
        }
        let snap = self.snapshot;
        let theta = angle_at(snap.cell_positions[cell], snap.sat_positions[serving], snap.sat_positions[other])?;
        Ok(self.radio.rx_pattern.attenuation_db(theta))
    }

    /// Sum of the transmit and receive attenuations (dB) suffered by the
    /// interference that `interferer` (served by `interferer_sat`) causes at
    /// `victim` (served by `victim_sat`).
    pub fn interference_attenuation_db(
        &self,
        victim: usize,
        victim_sat: usize,
        interferer: usize,
        interferer_sat: usize,
    ) -> Result<f64> {
        let tx = if victim == interferer {
            0.0
        } else {
            self.tx_attenuation_towards(interferer_sat, interferer, self.snapshot.cell_positions[victim])?
        };
        let rx = self.rx_attenuation(victim, victim_sat, interferer_sat)?;
        Ok(tx + rx)
    }
}

/// Co-channel interference power (W) at the victim beam from the active
/// beams. Beams of other polarizations contribute through the configured
/// cross-polarization isolation only.
pub fn interbeam_interference(ctx: &LinkContext<'_>, victim: BeamLink, active: &[BeamLink]) -> Result<f64> {
    let radio = ctx.radio;
    let mut total = 0.0;
    for link in active {
        if link.cell == victim.cell || (link.sat == victim.sat && link.beam == victim.beam) {
            continue;
        }
        let coupling = radio.polarization_coupling(victim.beam, link.beam);
        if coupling == 0.0 {
            continue;
        }
        let power = ctx.power(link.sat, link.cell, radio.sat_bandwidth_hz);
        let atten = ctx.interference_attenuation_db(victim.cell, victim.sat, link.cell, link.sat)?;
        total += coupling
            * power
            * radio.combined_peak_gain()
            * db_to_linear(-atten)
            * ctx.gain_sat_cell(link.sat, victim.cell);
    }
    Ok(total)
}

/// Dynamic attenuation threshold G^th_{c,c′} (dB) protecting `victim` from
/// `interferer`. The interference pair is harmless only when the summed
/// gain (negative attenuation) stays below this value.
pub fn dynamic_conflict_threshold(
    ctx: &LinkContext<'_>,
    victim: usize,
    interferer: usize,
    serving: &[usize],
    beams_per_sat: usize,
) -> f64 {
    let visible = ctx.snapshot.visible_count(victim).max(1);
    let snr_c = ctx.target_snr_db[victim];
    let snr_c2 = ctx.target_snr_db[interferer];
    let h_own = ctx.gain_sat_cell(serving[victim], victim);
    let h_cross = ctx.gain_sat_cell(serving[interferer], victim);
    conflict_threshold_db(ctx.radio.inr_beam_db, visible, beams_per_sat, snr_c, snr_c2, h_own, h_cross)
}

/// Closed form of the dynamic threshold with the SNR offset
/// `δ = 10^{(SNR_c − SNR_c′)/10}`.
pub fn conflict_threshold_db(
    inr_beam_db: f64,
    visible_sats: usize,
    beams_per_sat: usize,
    snr_victim_db: f64,
    snr_interferer_db: f64,
    h_own: f64,
    h_cross: f64,
) -> f64 {
    let delta = db_to_linear(snr_victim_db - snr_interferer_db);
    inr_beam_db
        - linear_to_db((visible_sats * beams_per_sat) as f64)
        - snr_interferer_db
        - linear_to_db(h_own / (delta * h_cross))
}

/// The tuple set K_f, stored as unordered cell pairs `(c, c′)` with `c < c′`.
/// Each cell has exactly one serving satellite, so the pair determines the
/// satellites as well.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictSet {
    pairs: BTreeSet<(usize, usize)>,
}

impl ConflictSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut set = Self::new();
        for (a, b) in pairs {
            set.insert(a, b);
        }
        set
    }

    pub fn insert(&mut self, a: usize, b: usize) {
        if a != b {
            self.pairs.insert((a.min(b), a.max(b)));
        }
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.pairs.contains(&(a.min(b), a.max(b)))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }
}

/// Builds K_f for the serving assignment `serving[c] = s`. A pair conflicts
/// when, in either direction, the summed antenna gain towards the victim is
/// not below the victim's dynamic threshold.
pub fn conflict_pairs(ctx: &LinkContext<'_>, serving: &[usize], beams_per_sat: usize) -> Result<ConflictSet> {
    let cells = serving.len();
    let mut set = ConflictSet::new();
    for a in 0..cells {
        for b in (a + 1)..cells {
            if violates(ctx, a, b, serving, beams_per_sat)? || violates(ctx, b, a, serving, beams_per_sat)? {
                set.insert(a, b);
            }
        }
    }
    Ok(set)
}

fn violates(ctx: &LinkContext<'_>, victim: usize, interferer: usize, serving: &[usize], beams: usize) -> Result<bool> {
    let atten = ctx.interference_attenuation_db(victim, serving[victim], interferer, serving[interferer])?;
    Ok(-atten >= dynamic_conflict_threshold(ctx, victim, interferer, serving, beams))
}

/// Interference (W) received at the center of `cluster` from beams that
/// borrow the terrestrial band, given as `(sat, cell)` pairs. The terrestrial
/// receiver gain is pinned at its peak (worst case).
pub fn terrestrial_interference(ctx: &LinkContext<'_>, cluster: usize, active: &[(usize, usize)]) -> Result<f64> {
    active.iter().map(|&(sat, cell)| terrestrial_contribution(ctx, cluster, sat, cell)).sum()
}

/// Interference (W) at `cluster` from one beam of `sat` aimed at `cell` on
/// the terrestrial band.
pub fn terrestrial_contribution(ctx: &LinkContext<'_>, cluster: usize, sat: usize, cell: usize) -> Result<f64> {
    let radio = ctx.radio;
    let power = ctx.power(sat, cell, radio.terr_bandwidth_hz);
    let atten = ctx.tx_attenuation_towards(sat, cell, ctx.snapshot.cluster_positions[cluster])?;
    Ok(power
        * db_to_linear(radio.tx_pattern.peak_gain_db - atten + radio.terr_peak_gain_db)
        * ctx.gain_sat_cluster(sat, cluster))
}

/// Interference-to-noise ratio (linear) at a terrestrial receiver.
pub fn terrestrial_inr(ctx: &LinkContext<'_>, interference_w: f64) -> f64 {
    interference_w / ctx.radio.noise_power(ctx.radio.terr_bandwidth_hz)
}
