//! Per-epoch metric rows and their summary.
//!
//! Column dictionary of `metrics.csv`:
//!
//! | column | meaning |
//! |---|---|
//! | `epoch` | epoch index f, from 1 |
//! | `p0_term` | Σ_c (D_c − Q_c)² for the epoch |
//! | `mean_queue_bits` | mean over cells of the queue after the epoch's service and arrivals |
//! | `mean_handover_freq` | mean over cells of H_c/f |
//! | `max_handover_freq` | max over cells of H_c/f |
//! | `sigma` | beam utilization of the epoch |
//! | `tau` | max/min ratio of satellite loads (inf when a satellite is idle) |
//! | `served_w1_bits` | bits delivered over the satellite band |
//! | `served_w2_bits` | bits delivered over the borrowed terrestrial band |
//! | `arrived_bits` | bits that arrived during the epoch |
//! | `mean_virtual_queue` | mean over cells of M after the epoch |
//! | `handovers` | serving-satellite changes in the epoch |
//! | `mandatory_cells` | cells whose serving satellite stopped being a candidate |
//! | `rebalanced` | 1 when swap matching ran |
//! | `conflict_pairs` | size of the epoch's conflict set |
//! | `sharing_vars` | candidate terrestrial-band variables |
//! | `sharing_on` | variables set to 1 |

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFrame {
    pub epoch: u64,
    pub p0_term: f64,
    pub mean_queue_bits: f64,
    pub mean_handover_freq: f64,
    pub max_handover_freq: f64,
    pub sigma: f64,
    pub tau: f64,
    pub served_w1_bits: f64,
    pub served_w2_bits: f64,
    pub arrived_bits: f64,
    pub mean_virtual_queue: f64,
    pub handovers: u32,
    pub mandatory_cells: u32,
    pub rebalanced: u8,
    pub conflict_pairs: u32,
    pub sharing_vars: u32,
    pub sharing_on: u32,
}

pub fn write_metrics_csv<W: Write>(writer: W, frames: &[MetricsFrame]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for f in frames {
        w.serialize(f)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: std::io::Read>(reader: R) -> Result<Vec<MetricsFrame>> {
    csv::Reader::from_reader(reader).deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Least-squares slope of `ys` against 0, 1, 2, ...
pub fn linear_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub epochs: u64,
    /// Number of trailing epochs the window means cover.
    pub window: usize,
    pub mean_queue_window: f64,
    pub mean_queue_all: f64,
    /// Slope of the mean queue over the last half of the run, bits per epoch.
    pub queue_slope_last_half: f64,
    /// Queue growth over the last half exceeds 5% of its mean.
    pub diverging: bool,
    /// Running time average of the p0 term at the final epoch.
    pub p0_time_average: f64,
    pub final_mean_handover_freq: f64,
    pub final_max_handover_freq: f64,
    /// Mean over cells of M/F at the final epoch.
    pub final_virtual_queue_ratio: f64,
    pub mean_sigma_window: f64,
    pub served_w1_bits_window: f64,
    pub served_w2_bits_window: f64,
    pub total_handovers: u64,
    /// Running time average of the p0 term after every epoch.
    pub p0_running_average: Vec<f64>,
}

/// Summarizes a run; `window` trailing epochs feed the window means.
pub fn metrics_summary(frames: &[MetricsFrame], window: usize) -> Result<MetricsSummary> {
    if frames.is_empty() || window == 0 {
        return Err(Error::Domain("metrics summary needs at least one frame and a non-empty window".into()));
    }
    let n = frames.len();
    let w = &frames[n - window.min(n)..];
    let mean = |xs: &[MetricsFrame], f: fn(&MetricsFrame) -> f64| xs.iter().map(f).sum::<f64>() / xs.len() as f64;
    let half: Vec<f64> = frames[n / 2..].iter().map(|f| f.mean_queue_bits).collect();
    let slope = linear_slope(&half);
    let half_mean = half.iter().sum::<f64>() / half.len() as f64;
    let mut acc = 0.0;
    let p0_running_average: Vec<f64> = frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            acc += f.p0_term;
            acc / (i + 1) as f64
        })
        .collect();
    let last = &frames[n - 1];
    Ok(MetricsSummary {
        epochs: last.epoch,
        window: w.len(),
        mean_queue_window: mean(w, |f| f.mean_queue_bits),
        mean_queue_all: mean(frames, |f| f.mean_queue_bits),
        queue_slope_last_half: slope,
        diverging: half_mean > 0.0 && slope * half.len() as f64 > 0.05 * half_mean,
        p0_time_average: *p0_running_average.last().expect("non-empty"),
        final_mean_handover_freq: last.mean_handover_freq,
        final_max_handover_freq: last.max_handover_freq,
        final_virtual_queue_ratio: last.mean_virtual_queue / last.epoch.max(1) as f64,
        mean_sigma_window: mean(w, |f| f.sigma),
        served_w1_bits_window: mean(w, |f| f.served_w1_bits),
        served_w2_bits_window: mean(w, |f| f.served_w2_bits),
        total_handovers: frames.iter().map(|f| f.handovers as u64).sum(),
        p0_running_average,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn frame(epoch: u64, queue: f64) -> MetricsFrame {
        MetricsFrame {
            epoch,
            p0_term: 4.0,
            mean_queue_bits: queue,
            mean_handover_freq: 0.0,
            max_handover_freq: 0.0,
            sigma: 0.5,
            tau: 1.0,
            served_w1_bits: 10.0,
            served_w2_bits: 1.0,
            arrived_bits: 11.0,
            mean_virtual_queue: 0.0,
            handovers: 0,
            mandatory_cells: 0,
            rebalanced: 0,
            conflict_pairs: 0,
            sharing_vars: 0,
            sharing_on: 0,
        }
    }

    #[test]
    fn constant_frames_summarize_to_the_constant() {
        let frames: Vec<_> = (1..=10).map(|e| frame(e, 7.0)).collect();
        let s = metrics_summary(&frames, 4).unwrap();
        assert_eq!(s.mean_queue_window, 7.0);
        assert_eq!(s.p0_time_average, 4.0);
        assert_eq!(s.queue_slope_last_half, 0.0);
        assert!(!s.diverging);
        assert_eq!(s.window, 4);
    }

    #[test]
    fn single_handover_frequency() {
        // One handover at epoch 2 in a 1000-epoch run: H/F = 1/1000.
        let mut frames: Vec<_> = (1..=1000).map(|e| frame(e, 1.0)).collect();
        for f in frames.iter_mut().skip(1) {
            f.max_handover_freq = 1.0 / f.epoch as f64;
        }
        frames[1].handovers = 1;
        let s = metrics_summary(&frames, 100).unwrap();
        assert_eq!(s.final_max_handover_freq, 1.0 / 1000.0);
        assert_eq!(s.total_handovers, 1);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(metrics_summary(&[], 10).is_err());
        assert!(metrics_summary(&[frame(1, 1.0)], 0).is_err());
    }

    #[test]
    fn growing_queue_is_flagged() {
        let frames: Vec<_> = (1..=100).map(|e| frame(e, e as f64)).collect();
        let s = metrics_summary(&frames, 10).unwrap();
        assert!((s.queue_slope_last_half - 1.0).abs() < 1e-12);
        assert!(s.diverging);
    }

    #[test]
    fn csv_round_trip() {
        let frames = vec![frame(1, 2.5), frame(2, 3.5)];
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &frames).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("epoch,p0_term,mean_queue_bits"));
        assert_eq!(read_metrics_csv(buf.as_slice()).unwrap(), frames);
    }
}
