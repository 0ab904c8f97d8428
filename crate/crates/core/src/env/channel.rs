use serde::{Deserialize, Serialize};

use super::{distance, Point3, UavState};
use crate::{Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

/// LoS link parameters between the UAVs and the HAPS, all in linear units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub carrier_hz: f64,
    pub lightspeed_m_s: f64,
    pub h_los_db: f64,
    pub uplink_bw_hz: f64,
    pub downlink_bw_hz: f64,
    pub uav_tx_w: f64,
    pub haps_tx_w: f64,
    pub noise_psd_w_hz: f64,
    pub haps_position: Point3,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 2e9,
            lightspeed_m_s: 3e8,
            h_los_db: 10.0,
            uplink_bw_hz: 5e6,
            downlink_bw_hz: 20e6,
            uav_tx_w: dbm_to_watts(26.0),
            haps_tx_w: dbm_to_watts(33.0),
            noise_psd_w_hz: dbm_to_watts(-174.0),
            haps_position: [500.0, 500.0, 20_000.0],
        }
    }
}

/// LoS path loss in dB.
pub fn los_path_loss(dist: f64, cfg: &ChannelConfig) -> Result<f64> {
    if !(dist > 0.0) {
        return Err(Error::InvalidArgument(format!("path loss needs a positive distance, got {dist}")));
    }
    Ok(20.0 * (4.0 * std::f64::consts::PI * dist * cfg.carrier_hz / cfg.lightspeed_m_s).log10() + cfg.h_los_db)
}

fn shannon_rate(bandwidth: f64, tx_w: f64, loss_db: f64, noise_psd: f64) -> f64 {
    let snr = tx_w * 10f64.powf(-loss_db / 10.0) / (bandwidth * noise_psd);
    bandwidth * (1.0 + snr).log2()
}

fn link_loss(uav: &UavState, cfg: &ChannelConfig) -> f64 {
    // The HAPS sits kilometres above every UAV, so the distance is never zero.
    los_path_loss(distance(&uav.position, &cfg.haps_position), cfg).unwrap_or(f64::INFINITY)
}

/// Uplink rate UAV -> HAPS in bit/s.
pub fn uplink_rate(uav: &UavState, cfg: &ChannelConfig) -> f64 {
    shannon_rate(cfg.uplink_bw_hz, cfg.uav_tx_w, link_loss(uav, cfg), cfg.noise_psd_w_hz)
}

/// Downlink rate HAPS -> UAV in bit/s.
pub fn downlink_rate(uav: &UavState, cfg: &ChannelConfig) -> f64 {
    shannon_rate(cfg.downlink_bw_hz, cfg.haps_tx_w, link_loss(uav, cfg), cfg.noise_psd_w_hz)
}
