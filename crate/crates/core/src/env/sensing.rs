use serde::{Deserialize, Serialize};

use super::{distance, WorldState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingConfig {
    /// Exponential decay of sensing success with slant distance, 1/m.
    pub xi_sense: f64,
    /// Minimum success probability for a device to count as covered.
    pub p_threshold: f64,
}

impl Default for SensingConfig {
    fn default() -> Self {
        Self { xi_sense: 1.07e-4, p_threshold: 0.9 }
    }
}

impl SensingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi_sense > 0.0 && self.xi_sense.is_finite()) {
            return Err(Error::InvalidArgument(format!("xi_sense must be > 0, got {}", self.xi_sense)));
        }
        if !(self.p_threshold > 0.0 && self.p_threshold <= 1.0) {
            return Err(Error::InvalidArgument(format!("p_threshold must lie in (0, 1], got {}", self.p_threshold)));
        }
        Ok(())
    }

    /// Largest slant distance at which the threshold is still met: -ln(P_th)/xi.
    pub fn max_range(&self) -> f64 {
        -self.p_threshold.ln() / self.xi_sense
    }
}

pub fn sensing_probability(associated: bool, dist: f64, cfg: &SensingConfig) -> f64 {
    if associated {
        (-cfg.xi_sense * dist).exp()
    } else {
        0.0
    }
}

/// Devices associated with `uav_id` whose sensing probability meets the threshold.
pub fn covered_devices(uav_id: usize, world: &WorldState, cfg: &SensingConfig) -> Result<Vec<usize>> {
    let uav = world.uavs.get(uav_id).ok_or(Error::UnknownUav(uav_id))?;
    Ok(world
        .devices
        .iter()
        .filter(|d| {
            let associated = world.association.get(d.id) == Some(uav_id);
            associated && sensing_probability(true, distance(&uav.position, &d.position), cfg) >= cfg.p_threshold
        })
        .map(|d| d.id)
        .collect())
}

pub fn coverage_capacity(uav_id: usize, world: &WorldState, cfg: &SensingConfig) -> Result<usize> {
    covered_devices(uav_id, world, cfg).map(|v| v.len())
}
