//! Per-cell data queues, arrival processes, handover counters and the
//! Lyapunov virtual queues together with the drift-plus-penalty terms.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Raw normalized demand of the 20 reference cells, in cell order. The
/// published values sum to 0.9999 and are renormalized on use.
pub const REFERENCE_DEMAND: [f64; 20] = [
    0.0221, 0.0636, 0.0636, 0.0325, 0.0740, 0.0325, 0.0209, 0.0428, 0.0429, 0.0532, 0.0844, 0.0428, 0.0325, 0.0221,
    0.0636, 0.0740, 0.0312, 0.0844, 0.0428, 0.0740,
];

pub fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = raw.iter().sum();
    if raw.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0) {
        return Err(Error::Config("demand weights must be non-negative with a positive sum".into()));
    }
    Ok(raw.iter().map(|w| w / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalDistribution {
    /// Poisson number of fixed-size packets per epoch.
    PoissonBatch { packet_bits: f64 },
    /// Exactly the mean every epoch.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalModel {
    pub mean_total_rate_bps: f64,
    /// Per-cell share of the total rate; renormalized by `validate`.
    pub weights: Vec<f64>,
    pub distribution: ArrivalDistribution,
}

impl ArrivalModel {
    pub fn reference(mean_total_rate_bps: f64) -> Self {
        Self {
            mean_total_rate_bps,
            weights: normalize_weights(&REFERENCE_DEMAND).expect("reference weights are valid"),
            distribution: ArrivalDistribution::PoissonBatch { packet_bits: 10_000.0 },
        }
    }

    /// Checks the model and renormalizes the weights to sum to one.
    pub fn validate(&mut self) -> Result<()> {
        if !(self.mean_total_rate_bps >= 0.0) || !self.mean_total_rate_bps.is_finite() {
            return Err(Error::Config("mean_total_rate_bps must be finite and non-negative".into()));
        }
        if let ArrivalDistribution::PoissonBatch { packet_bits } = self.distribution {
            if !(packet_bits > 0.0) {
                return Err(Error::Config("packet_bits must be positive".into()));
            }
        }
        self.weights = normalize_weights(&self.weights)?;
        Ok(())
    }

    pub fn mean_bits(&self, cell: usize, epoch_duration_s: f64) -> f64 {
        self.mean_total_rate_bps * epoch_duration_s * self.weights[cell]
    }
}

/// Bits arriving at every cell during epoch `epoch` (≥ 1).
pub fn sample_arrivals(model: &ArrivalModel, epoch: u64, epoch_duration_s: f64, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, epoch, Purpose::Arrivals);
    (0..model.weights.len())
        .map(|c| {
            let mean = model.mean_bits(c, epoch_duration_s);
            match model.distribution {
                ArrivalDistribution::Deterministic => mean,
                ArrivalDistribution::PoissonBatch { packet_bits } => {
                    let lambda = mean / packet_bits;
                    if lambda <= 0.0 {
                        return 0.0;
                    }
                    let packets: f64 = Poisson::new(lambda).expect("positive rate").sample(&mut rng);
                    packets * packet_bits
                }
            }
        })
        .collect()
}

/// Uniform draw of each cluster's terrestrial load in `[lo, hi]`.
pub fn sample_cluster_loads(count: usize, range: (f64, f64), epoch: u64, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, epoch, Purpose::ClusterLoad);
    (0..count).map(|_| if range.1 > range.0 { rng.gen_range(range.0..=range.1) } else { range.0 }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    #[serde(rename = "V")]
    pub v: f64,
    pub h_bar: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self { v: 100.0, h_bar: 0.004 }
    }
}

impl LyapunovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v >= 0.0) {
            return Err(Error::Config("V must be non-negative".into()));
        }
        if !(self.h_bar > 0.0 && self.h_bar < 1.0) {
            return Err(Error::Config("h_bar must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub cell_id: usize,
    /// Data queue Q in bits.
    pub queue_bits: f64,
    /// Virtual queue M.
    pub virtual_queue: f64,
    /// Accumulated handovers H.
    pub handovers: u64,
    pub serving_satellite: Option<usize>,
    pub target_snr_db: f64,
    pub demand_weight: f64,
}

impl CellState {
    pub fn new(cell_id: usize, target_snr_db: f64, demand_weight: f64) -> Self {
        Self {
            cell_id,
            queue_bits: 0.0,
            virtual_queue: 0.0,
            handovers: 0,
            serving_satellite: None,
            target_snr_db,
            demand_weight,
        }
    }
}

/// `max(Q − D, 0) + α`.
pub fn update_data_queue(queue: f64, served: f64, arrived: f64) -> f64 {
    (queue - served).max(0.0) + arrived
}

/// 1 when the serving satellite changed between epochs; 0 on the first epoch.
pub fn handover_increment(previous: Option<usize>, current: usize) -> u32 {
    match previous {
        Some(p) if p != current => 1,
        _ => 0,
    }
}

/// The virtual-queue arrival `m = handover − H̄`.
pub fn virtual_arrival(handover: u32, h_bar: f64) -> f64 {
    handover as f64 - h_bar
}

/// `max(M + handover − H̄, 0)`.
pub fn update_virtual_queue(m: f64, handover: u32, h_bar: f64) -> f64 {
    (m + virtual_arrival(handover, h_bar)).max(0.0)
}

/// Per-epoch drift-plus-penalty `V·Σ(D−Q)² + Σ M·m`.
pub fn epoch_penalty(served: &[f64], queue: &[f64], m_queue: &[f64], m_arrival: &[f64], v: f64) -> f64 {
    assert_eq!(served.len(), queue.len());
    assert_eq!(m_queue.len(), m_arrival.len());
    v * p0_objective_term(served, queue) + m_queue.iter().zip(m_arrival).map(|(m, a)| m * a).sum::<f64>()
}

/// `Σ_c (D_c − Q_c)²`.
pub fn p0_objective_term(served: &[f64], queue: &[f64]) -> f64 {
    served.iter().zip(queue).map(|(d, q)| (d - q).powi(2)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub epoch: u64,
    pub cell: usize,
    pub bits: f64,
}

pub fn write_arrival_trace<W: Write>(writer: W, records: &[ArrivalRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_arrival_trace<R: Read>(reader: R) -> Result<Vec<ArrivalRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

/// Arrivals replayed from a recorded trace; epochs absent from the trace
/// carry no traffic.
#[derive(Debug, Clone, Default)]
pub struct ArrivalReplay {
    by_epoch: std::collections::BTreeMap<u64, Vec<(usize, f64)>>,
}

impl ArrivalReplay {
    pub fn new(records: &[ArrivalRecord]) -> Self {
        let mut by_epoch: std::collections::BTreeMap<u64, Vec<(usize, f64)>> = Default::default();
        for r in records {
            by_epoch.entry(r.epoch).or_default().push((r.cell, r.bits));
        }
        Self { by_epoch }
    }

    pub fn arrivals(&self, epoch: u64, cells: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; cells];
        for &(cell, bits) in self.by_epoch.get(&epoch).map(Vec::as_slice).unwrap_or(&[]) {
            let slot = out
                .get_mut(cell)
                .ok_or_else(|| Error::Config(format!("arrival trace names cell {cell} of {cells}")))?;
            *slot += bits;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MB: f64 = 1e6;

    #[test]
    fn queue_update_examples() {
        assert_eq!(update_data_queue(5.0 * MB, 10.0 * MB, 2.0 * MB), 2.0 * MB);
        assert_eq!(update_data_queue(10.0 * MB, 0.0, 0.0), 10.0 * MB);
        assert_eq!(update_data_queue(10.0 * MB, 3.0 * MB, 1.0 * MB), 8.0 * MB);
    }

    #[test]
    fn reference_weights_normalize() {
        let raw: f64 = REFERENCE_DEMAND.iter().sum();
        assert!((raw - 0.9999).abs() < 1e-12);
        let w = ArrivalModel::reference(0.0).weights;
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_arrival_example() {
        let mut model = ArrivalModel::reference(6.52e9);
        model.distribution = ArrivalDistribution::Deterministic;
        let a = sample_arrivals(&model, 1, 0.2, 0);
        // 6.52e9 · 0.2 · 0.0221 = 28.8184 Mb; renormalization adds 1e-4 relative.
        assert!((a[0] / MB - 28.82).abs() < 0.005, "{}", a[0]);
        let zero = sample_arrivals(&ArrivalModel::reference(0.0), 5, 0.2, 9);
        assert!(zero.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn poisson_arrivals_are_reproducible_with_correct_mean() {
        let model = ArrivalModel::reference(6.52e9);
        assert_eq!(sample_arrivals(&model, 3, 0.2, 11), sample_arrivals(&model, 3, 0.2, 11));
        let epochs = 400;
        let mean: f64 = (1..=epochs).map(|f| sample_arrivals(&model, f, 0.2, 1)[10]).sum::<f64>() / epochs as f64;
        let expected = model.mean_bits(10, 0.2);
        // Packets per epoch ≈ 11000, so the sample mean is within ~0.1%.
        assert!((mean / expected - 1.0).abs() < 0.005);
    }

    #[test]
    fn handover_increment_examples() {
        assert_eq!(handover_increment(Some(3), 3), 0);
        assert_eq!(handover_increment(Some(3), 4), 1);
        assert_eq!(handover_increment(None, 4), 0);
    }

    #[test]
    fn virtual_queue_examples() {
        assert_eq!(update_virtual_queue(0.0, 0, 0.004), 0.0);
        assert!((update_virtual_queue(0.0, 1, 0.004) - 0.996).abs() < 1e-15);
        let mut m = 0.996;
        for _ in 0..249 {
            m = update_virtual_queue(m, 0, 0.004);
        }
        assert!(m.abs() < 1e-12);
    }

    #[test]
    fn penalty_examples() {
        let q = [3.0, 5.0];
        assert_eq!(epoch_penalty(&q, &q, &[0.0, 0.0], &[1.0, -0.004], 100.0), 0.0);
        let v = epoch_penalty(&[2.0], &[2.0], &[0.996], &[0.996], 100.0);
        assert!((v - 0.992016).abs() < 1e-12);
        let drift = epoch_penalty(&[0.0], &[4.0], &[0.5], &[2.0], 0.0);
        assert_eq!(drift, 1.0);
    }

    #[test]
    fn p0_examples() {
        assert_eq!(p0_objective_term(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(p0_objective_term(&[0.0], &[7.0]), 49.0);
        let v = p0_objective_term(&[1.0 * MB, 2.0 * MB], &[3.0 * MB, 2.0 * MB]);
        assert!((v / (MB * MB) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn arrival_trace_round_trip() {
        let records = vec![
            ArrivalRecord { epoch: 1, cell: 0, bits: 10_000.0 },
            ArrivalRecord { epoch: 1, cell: 2, bits: 20_000.0 },
            ArrivalRecord { epoch: 3, cell: 1, bits: 5.5 },
        ];
        let mut buf = Vec::new();
        write_arrival_trace(&mut buf, &records).unwrap();
        let back = read_arrival_trace(buf.as_slice()).unwrap();
        assert_eq!(back, records);
        let replay = ArrivalReplay::new(&back);
        assert_eq!(replay.arrivals(1, 3).unwrap(), vec![10_000.0, 0.0, 20_000.0]);
        assert_eq!(replay.arrivals(2, 3).unwrap(), vec![0.0; 3]);
        assert!(replay.arrivals(1, 2).is_err());
    }

    #[test]
    fn cluster_loads_in_range() {
        let l = sample_cluster_loads(200, (0.4, 0.6), 5, 3);
        assert!(l.iter().all(|&x| (0.4..=0.6).contains(&x)));
        assert_eq!(l, sample_cluster_loads(200, (0.4, 0.6), 5, 3));
    }
}
