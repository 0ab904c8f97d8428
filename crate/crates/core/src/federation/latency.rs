use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UavComputeConfig {
    /// CPU cycles per second.
    pub compute_capability: f64,
    pub cycles_per_sample: f64,
    pub model_size_bits: f64,
    /// Aggregation time per participating UAV, s.
    pub aggregation_unit_time: f64,
    /// Cap on the per-round training set drawn from a UAV's buffer.
    pub max_train_samples: usize,
}

impl Default for UavComputeConfig {
    fn default() -> Self {
        Self {
            compute_capability: 80_000.0,
            cycles_per_sample: 4.0,
            model_size_bits: 5_000.0,
            aggregation_unit_time: 1e-3,
            max_train_samples: 256,
        }
    }
}

impl UavComputeConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("compute_capability", self.compute_capability),
            ("cycles_per_sample", self.cycles_per_sample),
            ("model_size_bits", self.model_size_bits),
            ("aggregation_unit_time", self.aggregation_unit_time),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_train_samples == 0 {
            return Err(Error::InvalidArgument("max_train_samples must be positive".into()));
        }
        Ok(())
    }
}

pub fn local_update_latency(dataset_size: usize, cfg: &UavComputeConfig) -> f64 {
    dataset_size as f64 * cfg.cycles_per_sample / cfg.compute_capability
}

fn transfer(rate_bps: f64, cfg: &UavComputeConfig) -> Result<f64> {
    if !(rate_bps > 0.0) {
        return Err(Error::InvalidArgument(format!("no link: rate {rate_bps} bit/s")));
    }
    Ok(cfg.model_size_bits / rate_bps)
}

pub fn upload_latency(uplink_bps: f64, cfg: &UavComputeConfig) -> Result<f64> {
    transfer(uplink_bps, cfg)
}

pub fn aggregation_latency(n_selected: usize, cfg: &UavComputeConfig) -> f64 {
    cfg.aggregation_unit_time * n_selected as f64
}

pub fn distribution_latency(downlink_bps: f64, cfg: &UavComputeConfig) -> Result<f64> {
    transfer(downlink_bps, cfg)
}

/// The four latency components of one participating UAV.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct UavLatency {
    pub uav: usize,
    pub update: f64,
    pub upload: f64,
    pub aggregation: f64,
    pub distribution: f64,
}

impl UavLatency {
    pub fn total(&self) -> f64 {
        self.update + self.upload + self.aggregation + self.distribution
    }
}

/// Slowest participant's end-to-end latency.
pub fn round_time(per_uav: &[UavLatency]) -> Result<f64> {
    if per_uav.is_empty() {
        return Err(Error::Empty("selection".into()));
    }
    Ok(per_uav.iter().map(UavLatency::total).fold(f64::NEG_INFINITY, f64::max))
}

/// Mean end-to-end latency over participants.
pub fn time_cost(per_uav: &[UavLatency]) -> Result<f64> {
    if per_uav.is_empty() {
        return Err(Error::Empty("selection".into()));
    }
    Ok(per_uav.iter().map(UavLatency::total).sum::<f64>() / per_uav.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct LatencyBreakdown {
    pub per_uav: Vec<UavLatency>,
    pub round_time: f64,
    pub time_cost: f64,
}

impl LatencyBreakdown {
    pub fn from_parts(per_uav: Vec<UavLatency>) -> Result<Self> {
        let round_time = round_time(&per_uav)?;
        let time_cost = time_cost(&per_uav)?;
        Ok(Self { per_uav, round_time, time_cost })
    }

    /// Sum over participants of the aggregation component.
    pub fn aggregation_total(&self) -> f64 {
        self.per_uav.iter().map(|l| l.aggregation).sum()
    }
}
