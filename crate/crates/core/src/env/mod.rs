//! Three-layer network environment: ground devices, UAVs at a fixed altitude,
//! and a stationary HAPS acting as the aggregation server.

mod channel;
mod energy;
mod sensing;
mod world;

pub use channel::{dbm_to_watts, downlink_rate, los_path_loss, uplink_rate, ChannelConfig};
pub use energy::{computational_energy, propulsion_energy, propulsion_power, transmission_energy, EnergyConfig};
pub use sensing::{coverage_capacity, covered_devices, sensing_probability, SensingConfig};
pub use world::{
    apply_uav_positions, step_devices, Association, DeviceState, Mobility, UavState, WorldConfig, WorldState,
};

pub type Point3 = [f64; 3];

/// Euclidean distance between two points.
pub fn distance(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}
