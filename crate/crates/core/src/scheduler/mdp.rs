use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use crate::env::{distance, Association, SensingConfig, WorldState};
use crate::{Error, Result};

/// Width of the observation: device positions, UAV positions, UAV energies.
pub fn state_dim(n_devices: usize, n_uavs: usize) -> usize {
    3 * n_devices + 4 * n_uavs
}

/// Width of the one-hot association matrix plus the selection vector.
pub fn discrete_dim(n_devices: usize, n_uavs: usize) -> usize {
    n_devices * n_uavs + n_uavs
}

/// Flattened observation with every coordinate scaled to [0, 1].
pub fn observe(world: &WorldState, area_side_m: f64, altitude_m: f64, e_max_j: f64) -> Vec<f64> {
    let mut s = Vec::with_capacity(state_dim(world.n_devices(), world.n_uavs()));
    for d in &world.devices {
        s.extend([d.position[0] / area_side_m, d.position[1] / area_side_m, d.position[2] / altitude_m]);
    }
    for u in &world.uavs {
        s.extend([u.position[0] / area_side_m, u.position[1] / area_side_m, u.position[2] / altitude_m]);
    }
    for u in &world.uavs {
        s.push(u.remaining_energy / e_max_j);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteAction {
    pub association: Association,
    pub selection: Vec<bool>,
}

impl DiscreteAction {
    pub fn encode_into(&self, n_uavs: usize, out: &mut Vec<f64>) {
        for a in self.association.as_slice() {
            out.extend((0..n_uavs).map(|n| if *a == Some(n) { 1.0 } else { 0.0 }));
        }
        out.extend(self.selection.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    }

    pub fn selection_mask(&self) -> u64 {
        self.selection.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| 1u64 << i).sum()
    }
}

/// Discrete choice plus per-UAV displacement as a fraction of the largest
/// single-slot move, each coordinate in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub discrete: DiscreteAction,
    pub displacement: Vec<f64>,
}

/// UAVs each device may associate with: those within sensing range.
pub fn feasible_uavs(world: &WorldState, sensing: &SensingConfig) -> Vec<Vec<usize>> {
    let range = sensing.max_range();
    world
        .devices
        .iter()
        .map(|d| {
            world.uavs.iter().filter(|u| distance(&u.position, &d.position) <= range).map(|u| u.id).collect()
        })
        .collect()
}

/// Every device to its closest feasible UAV (lowest id on ties).
pub fn nearest_association(world: &WorldState, feasible: &[Vec<usize>]) -> Association {
    let per_device = world
        .devices
        .iter()
        .zip(feasible)
        .map(|(d, options)| {
            let mut best: Option<(usize, f64)> = None;
            for &n in options {
                let dist = distance(&world.uavs[n].position, &d.position);
                if best.is_none_or(|(_, b)| dist < b) {
                    best = Some((n, dist));
                }
            }
            best.map(|(n, _)| n)
        })
        .collect();
    Association::new(per_device)
}

/// Uniform over nonempty selections crossed with, per device, uniform over
/// "unassociated" and its feasible UAVs.
pub fn random_discrete_action<R: Rng + ?Sized>(feasible: &[Vec<usize>], n_uavs: usize, rng: &mut R) -> DiscreteAction {
    let association = feasible
        .iter()
        .map(|options| {
            let k = rng.random_range(0..=options.len());
            if k == 0 {
                None
            } else {
                Some(options[k - 1])
            }
        })
        .collect();
    let mask = rng.random_range(1..(1u64 << n_uavs));
    let selection = (0..n_uavs).map(|i| mask >> i & 1 == 1).collect();
    DiscreteAction { association: Association::new(association), selection }
}

/// Uniform displacement in the box.
pub fn random_displacement<R: Rng + ?Sized>(n_uavs: usize, rng: &mut R) -> Vec<f64> {
    (0..2 * n_uavs).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_feasible: Vec<Vec<usize>>,
    /// Starting point of the association search at the next state.
    pub next_nearest: Association,
}

/// Bounded FIFO of experiences.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, items: VecDeque::with_capacity(capacity.min(4096)) }
    }

    pub fn push(&mut self, e: Experience) -> Result<()> {
        if !e.reward.is_finite() {
            return Err(Error::NonFinite("reward".into()));
        }
        if self.capacity == 0 {
            return Ok(());
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.items.get(i)
    }

    /// `size` distinct experiences drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Vec<&Experience>> {
        if size > self.items.len() {
            return Err(Error::InvalidArgument(format!("cannot draw {size} from {} experiences", self.items.len())));
        }
        Ok(index::sample(rng, self.items.len(), size).iter().map(|i| &self.items[i]).collect())
    }
}
