use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{propulsion_energy, EnergyConfig, Point3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mobility {
    Static,
    RandomWalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub area_side_m: f64,
    pub n_devices: usize,
    pub n_uavs: usize,
    pub altitude_m: f64,
    pub slot_duration_s: f64,
    pub mobility: Mobility,
    pub walk_radius_m: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            area_side_m: 1000.0,
            n_devices: 20,
            n_uavs: 5,
            altitude_m: 100.0,
            slot_duration_s: 10.0,
            mobility: Mobility::RandomWalk,
            walk_radius_m: 1.0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_side_m", self.area_side_m),
            ("altitude_m", self.altitude_m),
            ("slot_duration_s", self.slot_duration_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_devices == 0 || self.n_uavs == 0 {
            return Err(Error::InvalidArgument("world needs at least one device and one uav".into()));
        }
        if self.walk_radius_m < 0.0 {
            return Err(Error::InvalidArgument("walk_radius_m must be non-negative".into()));
        }
        Ok(())
    }

    fn clamp_xy(&self, v: f64) -> f64 {
        v.clamp(0.0, self.area_side_m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    pub id: usize,
    pub position: Point3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavState {
    pub id: usize,
    pub position: Point3,
    pub remaining_energy: f64,
}

/// Device-to-UAV association. Storing one optional UAV per device keeps every
/// row of the binary association matrix at most one-hot.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Association(Vec<Option<usize>>);

impl Association {
    pub fn new(per_device: Vec<Option<usize>>) -> Self {
        Self(per_device)
    }

    pub fn none(n_devices: usize) -> Self {
        Self(vec![None; n_devices])
    }

    pub fn get(&self, device: usize) -> Option<usize> {
        self.0.get(device).copied().flatten()
    }

    pub fn set(&mut self, device: usize, uav: Option<usize>) {
        self.0[device] = uav;
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.0
    }

    /// K x N binary matrix.
    pub fn to_matrix(&self, n_uavs: usize) -> Vec<Vec<u8>> {
        self.0
            .iter()
            .map(|a| (0..n_uavs).map(|n| u8::from(*a == Some(n))).collect())
            .collect()
    }

    pub fn count_for(&self, uav: usize) -> usize {
        self.0.iter().filter(|a| **a == Some(uav)).count()
    }
}

/// Snapshot of the network at one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub slot: usize,
    pub devices: Vec<DeviceState>,
    pub uavs: Vec<UavState>,
    pub association: Association,
    pub selection: Vec<bool>,
}

impl WorldState {
    /// Devices and UAVs placed uniformly in the square, UAVs at full energy.
    pub fn random<R: Rng + ?Sized>(cfg: &WorldConfig, energy: &EnergyConfig, rng: &mut R) -> Self {
        let side = cfg.area_side_m;
        let devices = (0..cfg.n_devices)
            .map(|id| DeviceState { id, position: [rng.random::<f64>() * side, rng.random::<f64>() * side, 0.0] })
            .collect();
        let uavs = (0..cfg.n_uavs)
            .map(|id| UavState {
                id,
                position: [rng.random::<f64>() * side, rng.random::<f64>() * side, cfg.altitude_m],
                remaining_energy: energy.e_max_j,
            })
            .collect();
        Self {
            slot: 0,
            devices,
            uavs,
            association: Association::none(cfg.n_devices),
            selection: vec![false; cfg.n_uavs],
        }
    }

    pub fn n_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn n_uavs(&self) -> usize {
        self.uavs.len()
    }

    /// Deducts per-UAV consumption, flooring the remaining energy at zero.
    pub fn consume_energy(&mut self, joules: &[f64]) {
        for (uav, e) in self.uavs.iter_mut().zip(joules) {
            uav.remaining_energy = (uav.remaining_energy - e).max(0.0);
        }
    }
}

fn reflect(v: f64, side: f64) -> f64 {
    let r = if v < 0.0 {
        -v
    } else if v > side {
        2.0 * side - v
    } else {
        v
    };
    r.clamp(0.0, side)
}

/// Advances device positions by one slot of the configured mobility model.
pub fn step_devices<R: Rng + ?Sized>(world: &WorldState, cfg: &WorldConfig, rng: &mut R) -> WorldState {
    let mut next = world.clone();
    if cfg.mobility == Mobility::RandomWalk {
        for d in &mut next.devices {
            let r = cfg.walk_radius_m * rng.random::<f64>().sqrt();
            let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            d.position[0] = reflect(d.position[0] + r * phi.cos(), cfg.area_side_m);
            d.position[1] = reflect(d.position[1] + r * phi.sin(), cfg.area_side_m);
        }
    }
    next
}

/// Moves every UAV toward its target, at most `V * slot` metres, and charges
/// the propulsion energy of the move actually flown. Returns that energy per UAV.
pub fn apply_uav_positions(
    world: &WorldState,
    targets: &[[f64; 2]],
    cfg: &WorldConfig,
    energy: &EnergyConfig,
) -> Result<(WorldState, Vec<f64>)> {
    if targets.len() != world.uavs.len() {
        return Err(Error::Shape(format!("{} targets for {} uavs", targets.len(), world.uavs.len())));
    }
    let max_step = energy.velocity_m_s * cfg.slot_duration_s;
    let mut next = world.clone();
    let mut spent = Vec::with_capacity(targets.len());
    for (uav, target) in next.uavs.iter_mut().zip(targets) {
        let tx = cfg.clamp_xy(target[0]);
        let ty = cfg.clamp_xy(target[1]);
        let dx = tx - uav.position[0];
        let dy = ty - uav.position[1];
        let len = (dx * dx + dy * dy).sqrt();
        let scale = if len > max_step { max_step / len } else { 1.0 };
        let prev = uav.position;
        uav.position = [
            cfg.clamp_xy(prev[0] + dx * scale),
            cfg.clamp_xy(prev[1] + dy * scale),
            cfg.altitude_m,
        ];
        let e = propulsion_energy(&prev, &uav.position, energy);
        uav.remaining_energy = (uav.remaining_energy - e).max(0.0);
        spent.push(e);
    }
    Ok((next, spent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;

    fn small_world(mobility: Mobility) -> (WorldConfig, WorldState) {
        let cfg = WorldConfig { n_devices: 6, n_uavs: 2, mobility, ..Default::default() };
        let mut rng = Streams::new(3).global("world");
        let w = WorldState::random(&cfg, &EnergyConfig::default(), &mut rng);
        (cfg, w)
    }

    #[test]
    fn static_mobility_keeps_positions() {
        let (cfg, w) = small_world(Mobility::Static);
        let mut rng = Streams::new(1).global("m");
        assert_eq!(step_devices(&w, &cfg, &mut rng), w);
    }

    #[test]
    fn random_walk_is_deterministic_and_bounded() {
        let (cfg, w) = small_world(Mobility::RandomWalk);
        let a = step_devices(&w, &cfg, &mut Streams::new(1).global("m"));
        let b = step_devices(&w, &cfg, &mut Streams::new(1).global("m"));
        assert_eq!(a, b);
        assert_eq!(a.uavs, w.uavs);

        let cfg = WorldConfig { walk_radius_m: 25.0, ..cfg };
        let mut rng = Streams::new(9).global("walk");
        let mut cur = w;
        for _ in 0..10_000 {
            cur = step_devices(&cur, &cfg, &mut rng);
            for d in &cur.devices {
                assert!((0.0..=cfg.area_side_m).contains(&d.position[0]));
                assert!((0.0..=cfg.area_side_m).contains(&d.position[1]));
                assert_eq!(d.position[2], 0.0);
            }
        }
    }

    #[test]
    fn uav_moves_are_capped_and_charged() {
        let (cfg, mut w) = small_world(Mobility::Static);
        w.uavs[0].position = [100.0, 100.0, cfg.altitude_m];
        w.uavs[1].position = [500.0, 500.0, cfg.altitude_m];
        let e = EnergyConfig::default();

        let (same, spent) = apply_uav_positions(&w, &[[100.0, 100.0], [500.0, 500.0]], &cfg, &e).unwrap();
        assert_eq!(spent, vec![0.0, 0.0]);
        assert_eq!(same, w);

        let (moved, spent) = apply_uav_positions(&w, &[[1100.0, 100.0], [500.0, 500.0]], &cfg, &e).unwrap();
        // target clamped to x = 1000, 900 m away, capped at 30 * 10 = 300 m
        assert!((moved.uavs[0].position[0] - 400.0).abs() < 1e-9);
        assert_eq!(moved.uavs[0].position[2], cfg.altitude_m);
        assert!((spent[0] - 300.0 / 30.0 * crate::env::propulsion_power(&e)).abs() < 1e-9);
        assert!(moved.uavs[0].remaining_energy < w.uavs[0].remaining_energy);
        assert_eq!(moved.uavs[1].remaining_energy, w.uavs[1].remaining_energy);

        assert!(apply_uav_positions(&w, &[[0.0, 0.0]], &cfg, &e).is_err());
    }

    #[test]
    fn association_matrix_rows_are_one_hot() {
        let a = Association::new(vec![Some(1), None, Some(0)]);
        let m = a.to_matrix(2);
        assert_eq!(m, vec![vec![0, 1], vec![0, 0], vec![1, 0]]);
        assert!(m.iter().all(|r| r.iter().map(|&x| x as u32).sum::<u32>() <= 1));
        assert_eq!(a.count_for(1), 1);
    }
}
