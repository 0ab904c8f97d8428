use serde::{Deserialize, Serialize};

use super::{distance, ChannelConfig, Point3};

/// Rotary-wing UAV energy parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub g_param: f64,
    pub velocity_m_s: f64,
    pub e_max_j: f64,
    pub compute_power_w: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            kappa1: 0.009,
            kappa2: 357.0,
            kappa3: 80.0,
            g_param: 69.0,
            velocity_m_s: 30.0,
            e_max_j: 50_000.0,
            compute_power_w: 5.0,
        }
    }
}

/// Power drawn while flying at the configured cruise velocity, W.
pub fn propulsion_power(cfg: &EnergyConfig) -> f64 {
    let v = cfg.velocity_m_s;
    cfg.kappa1 * v.powi(3) + cfg.kappa2 / v + cfg.kappa3 * (1.0 + v * v / (cfg.g_param * cfg.g_param))
}

/// Energy to fly from `prev` to `next` at cruise velocity. Hovering costs nothing.
pub fn propulsion_energy(prev: &Point3, next: &Point3, cfg: &EnergyConfig) -> f64 {
    distance(prev, next) / cfg.velocity_m_s * propulsion_power(cfg)
}

pub fn computational_energy(selected: bool, update_latency: f64, cfg: &EnergyConfig) -> f64 {
    if selected {
        cfg.compute_power_w * update_latency
    } else {
        0.0
    }
}

pub fn transmission_energy(selected: bool, upload_latency: f64, cfg: &ChannelConfig) -> f64 {
    if selected {
        cfg.uav_tx_w * upload_latency
    } else {
        0.0
    }
}
