use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::baselines::{DdpgAgent, DqnAgent};
use super::ca2c::{displacement_targets, select_discrete_action, train_actor, train_critic, Ca2cAgent, Ca2cConfig, Dims};
use super::mdp::{
    feasible_uavs, nearest_association, observe, random_discrete_action, random_displacement, Action, DiscreteAction,
    Experience, ReplayBuffer,
};
use super::{energy_penalty, reward, system_cost};
use crate::dataset::DeviceStreams;
use crate::detector::MetricsReport;
use crate::env::{apply_uav_positions, covered_devices, step_devices, SensingConfig, WorldConfig, WorldState};
use crate::federation::{run_round, FedState, RoundConfig, RoundPlan};
use crate::rng::Streams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Ca2cAfl,
    DqnAfl,
    DdpgFl,
    Standalone,
    Random,
}

impl Algo {
    pub const ALL: [Algo; 5] = [Algo::Ca2cAfl, Algo::DqnAfl, Algo::DdpgFl, Algo::Standalone, Algo::Random];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Ca2cAfl => "ca2c_afl",
            Algo::DqnAfl => "dqn_afl",
            Algo::DdpgFl => "ddpg_fl",
            Algo::Standalone => "standalone",
            Algo::Random => "random",
        }
    }

    /// Every UAV waits for the slowest one each round.
    pub fn is_synchronous(self) -> bool {
        self == Algo::DdpgFl
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm `{s}`")))
    }
}

pub enum Policy {
    Ca2c(Box<Ca2cAgent>),
    Dqn(Box<DqnAgent>),
    Ddpg(Box<DdpgAgent>),
    Standalone,
    Random,
}

impl Policy {
    pub fn algo(&self) -> Algo {
        match self {
            Policy::Ca2c(_) => Algo::Ca2cAfl,
            Policy::Dqn(_) => Algo::DqnAfl,
            Policy::Ddpg(_) => Algo::DdpgFl,
            Policy::Standalone => Algo::Standalone,
            Policy::Random => Algo::Random,
        }
    }

    fn learns(&self) -> bool {
        matches!(self, Policy::Ca2c(_) | Policy::Dqn(_) | Policy::Ddpg(_))
    }
}

pub fn make_policy<R: Rng + ?Sized>(algo: Algo, dims: Dims, cfg: &Ca2cConfig, rng: &mut R) -> Result<Policy> {
    Ok(match algo {
        Algo::Ca2cAfl => Policy::Ca2c(Box::new(Ca2cAgent::new(dims, cfg, rng)?)),
        Algo::DqnAfl => Policy::Dqn(Box::new(DqnAgent::new(dims, cfg, rng)?)),
        Algo::DdpgFl => Policy::Ddpg(Box::new(DdpgAgent::new(dims, cfg, rng)?)),
        Algo::Standalone => Policy::Standalone,
        Algo::Random => Policy::Random,
    })
}

/// One of the comparison schemes `dqn_afl`, `ddpg_fl` or `standalone`.
pub fn make_baseline<R: Rng + ?Sized>(kind: &str, dims: Dims, cfg: &Ca2cConfig, rng: &mut R) -> Result<Policy> {
    match kind.parse()? {
        a @ (Algo::DqnAfl | Algo::DdpgFl | Algo::Standalone) => make_policy(a, dims, cfg, rng),
        other => Err(Error::InvalidArgument(format!("`{other}` is not a baseline"))),
    }
}

/// Replaces an empty selection by the single UAV with the largest `marginal`
/// (lowest id on ties).
pub fn coerce_selection<F: FnMut(usize) -> Result<f64>>(selection: &mut [bool], mut marginal: F) -> Result<()> {
    if selection.iter().any(|b| *b) {
        return Ok(());
    }
    let mut best = (0, f64::NEG_INFINITY);
    for n in 0..selection.len() {
        let v = marginal(n)?;
        if v > best.1 {
            best = (n, v);
        }
    }
    selection[best.0] = true;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub world: WorldConfig,
    pub sensing: SensingConfig,
    pub round: RoundConfig,
    pub scheduler: Ca2cConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotMetrics {
    pub episode: u64,
    pub slot: usize,
    pub reward: f64,
    pub system_cost: f64,
    pub coverage_sum: usize,
    pub time_cost: f64,
    pub round_time: f64,
    /// What participants actually wait: the round time for synchronous
    /// schemes, the time cost otherwise.
    pub exec_time: f64,
    pub aggregation_latency: f64,
    pub disc_loss: f64,
    pub gen_loss: f64,
    pub penalty_sum: f64,
    pub propulsion_energy: Vec<f64>,
    pub compute_energy: Vec<f64>,
    pub transmission_energy: Vec<f64>,
    pub selection_mask: u64,
    pub associated: usize,
}

impl SlotMetrics {
    pub fn uav_energy(&self, n: usize) -> f64 {
        self.propulsion_energy[n] + self.compute_energy[n] + self.transmission_energy[n]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub slots: Vec<SlotMetrics>,
    pub mean_reward: f64,
    pub discounted_return: f64,
    pub total_energy: Vec<f64>,
    /// Sum over slots of `exec_time`.
    pub exec_time_avg: f64,
    /// Sum over slots of `round_time`.
    pub exec_time_max: f64,
    pub detection: Option<MetricsReport>,
}

impl EpisodeMetrics {
    fn from_slots(episode: u64, slots: Vec<SlotMetrics>, n_uavs: usize, chi: f64) -> Self {
        let t = slots.len();
        let mean_reward = if t == 0 { 0.0 } else { slots.iter().map(|s| s.reward).sum::<f64>() / t as f64 };
        let discounted_return = slots.iter().rev().fold(0.0, |acc, s| s.reward + chi * acc);
        let total_energy = (0..n_uavs).map(|n| slots.iter().map(|s| s.uav_energy(n)).sum()).collect();
        let exec_time_avg = slots.iter().map(|s| s.exec_time).sum();
        let exec_time_max = slots.iter().map(|s| s.round_time).sum();
        Self { episode, slots, mean_reward, discounted_return, total_energy, exec_time_avg, exec_time_max, detection: None }
    }
}

/// Everything that persists across episodes of one run.
pub struct Simulation {
    pub cfg: SimConfig,
    pub streams: Streams,
    pub policy: Policy,
    pub replay: ReplayBuffer,
    pub fed: FedState,
    pub devices: DeviceStreams,
}

impl Simulation {
    pub fn new(cfg: SimConfig, algo: Algo, streams: Streams, fed: FedState, devices: DeviceStreams) -> Result<Self> {
        cfg.world.validate()?;
        cfg.sensing.validate()?;
        cfg.scheduler.validate()?;
        cfg.round.compute.validate()?;
        if fed.n_uavs() != cfg.world.n_uavs || devices.n_devices() != cfg.world.n_devices {
            return Err(Error::Shape("federation state and device streams must match the world".into()));
        }
        let dims = Dims { n_devices: cfg.world.n_devices, n_uavs: cfg.world.n_uavs };
        let policy = make_policy(algo, dims, &cfg.scheduler, &mut streams.global("policy_init"))?;
        let replay = ReplayBuffer::new(cfg.scheduler.replay_capacity);
        Ok(Self { cfg, streams, policy, replay, fed, devices })
    }

    fn observe(&self, world: &WorldState) -> Vec<f64> {
        observe(world, self.cfg.world.area_side_m, self.cfg.world.altitude_m, self.cfg.round.energy.e_max_j)
    }

    fn choose<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        feasible: &[Vec<usize>],
        nearest: &crate::env::Association,
        rng: &mut R,
    ) -> Result<Action> {
        let n = self.cfg.world.n_uavs;
        let eps = self.cfg.scheduler.epsilon_explore;
        let all = || DiscreteAction { association: nearest.clone(), selection: vec![true; n] };
        let (mut discrete, displacement) = match &self.policy {
            Policy::Ca2c(agent) => {
                let a = select_discrete_action(agent, state, feasible, nearest, eps, rng)?;
                let u = agent.policy(&agent.actor, state, &a)?;
                (a, u)
            }
            Policy::Dqn(agent) => (agent.act(state, feasible, nearest, eps, rng)?, random_displacement(n, rng)),
            Policy::Ddpg(agent) => (all(), agent.act(state, self.cfg.scheduler.ddpg_noise_std, rng)?),
            Policy::Standalone => (all(), random_displacement(n, rng)),
            Policy::Random => (random_discrete_action(feasible, n, rng), random_displacement(n, rng)),
        };
        let assoc = discrete.association.clone();
        coerce_selection(&mut discrete.selection, |k| {
            let single = DiscreteAction { association: assoc.clone(), selection: (0..n).map(|i| i == k).collect() };
            match &self.policy {
                Policy::Ca2c(agent) => agent.q_of(&agent.actor, &agent.critic, state, &single),
                Policy::Dqn(agent) => agent.value(&agent.q, state, &single),
                _ => Ok(0.0),
            }
        })?;
        Ok(Action { discrete, displacement })
    }

    fn learn(&mut self, episode: u64, slot: usize) -> Result<()> {
        let sc = &self.cfg.scheduler;
        if !self.policy.learns() || self.replay.len() < sc.batch_size {
            return Ok(());
        }
        let mut rng = self.streams.stream("replay", episode, slot as u64, 0);
        let batch = self.replay.sample(sc.batch_size, &mut rng)?;
        match &mut self.policy {
            Policy::Ca2c(agent) => {
                train_critic(agent, &batch, sc.chi, sc.tau)?;
                train_actor(agent, &batch, sc.tau)?;
            }
            Policy::Dqn(agent) => {
                agent.train(&batch, sc.chi, sc.tau)?;
            }
            Policy::Ddpg(agent) => {
                agent.train(&batch, sc.chi, sc.tau)?;
            }
            Policy::Standalone | Policy::Random => {}
        }
        Ok(())
    }
}

/// Runs `cfg.scheduler.slots` slots: observe, act, move, sense, run one
/// federated round, score the slot, store the transition and train.
pub fn run_episode(sim: &mut Simulation, episode: u64) -> Result<EpisodeMetrics> {
    let cfg = sim.cfg.clone();
    let n = cfg.world.n_uavs;
    let slots = cfg.scheduler.slots;
    let max_step = cfg.round.energy.velocity_m_s * cfg.world.slot_duration_s;
    let algo = sim.policy.algo();
    let mut round_cfg = cfg.round;
    round_cfg.federated = algo != Algo::Standalone;

    let mut world = WorldState::random(&cfg.world, &cfg.round.energy, &mut sim.streams.stream("world", episode, 0, 0));
    let mut feasible = feasible_uavs(&world, &cfg.sensing);
    let mut nearest = nearest_association(&world, &feasible);
    let mut state = sim.observe(&world);
    let mut rows = Vec::with_capacity(slots);

    for t in 0..slots {
        let mut rng = sim.streams.stream("policy", episode, t as u64, 0);
        let action = sim.choose(&state, &feasible, &nearest, &mut rng)?;

        let targets = displacement_targets(&world, &action.displacement, max_step);
        let (moved, propulsion) = apply_uav_positions(&world, &targets, &cfg.world, &cfg.round.energy)?;
        world = moved;
        world.association = action.discrete.association.clone();
        world.selection = action.discrete.selection.clone();

        let mut coverage_sum = 0;
        for uav in 0..n {
            for d in covered_devices(uav, &world, &cfg.sensing)? {
                sim.fed.buffers[uav].push(sim.devices.next_sample(d).to_vec());
                coverage_sum += 1;
            }
        }

        let plan = RoundPlan::from_buffers(t, world.selection.clone(), &sim.fed.buffers, &cfg.round.compute);
        let out = run_round(&mut sim.fed, &world, &plan, &round_cfg, &sim.streams, episode)?;
        let other: Vec<f64> = (0..n).map(|i| out.compute_energy[i] + out.transmission_energy[i]).collect();
        world.consume_energy(&other);
        let total: Vec<f64> = (0..n).map(|i| propulsion[i] + other[i]).collect();
        let penalties = energy_penalty(&total, cfg.round.energy.e_max_j, slots);
        let cost = system_cost(coverage_sum as f64, out.latency.time_cost, out.disc_loss, &cfg.scheduler.weights);
        let r = reward(cost, &penalties, cfg.scheduler.energy_penalty_coeff);

        world = step_devices(&world, &cfg.world, &mut sim.streams.stream("mobility", episode, t as u64, 0));
        world.slot = t + 1;
        let next_state = sim.observe(&world);
        feasible = feasible_uavs(&world, &cfg.sensing);
        nearest = nearest_association(&world, &feasible);

        rows.push(SlotMetrics {
            episode,
            slot: t,
            reward: r,
            system_cost: cost,
            coverage_sum,
            time_cost: out.latency.time_cost,
            round_time: out.latency.round_time,
            exec_time: if algo.is_synchronous() { out.latency.round_time } else { out.latency.time_cost },
            aggregation_latency: out.latency.aggregation_total(),
            disc_loss: out.disc_loss,
            gen_loss: out.gen_loss,
            penalty_sum: penalties.iter().sum(),
            propulsion_energy: propulsion,
            compute_energy: out.compute_energy,
            transmission_energy: out.transmission_energy,
            selection_mask: action.discrete.selection_mask(),
            associated: action.discrete.association.as_slice().iter().filter(|a| a.is_some()).count(),
        });

        if sim.policy.learns() {
            sim.replay.push(Experience {
                state: std::mem::replace(&mut state, next_state.clone()),
                action,
                reward: r,
                next_state,
                next_feasible: feasible.clone(),
                next_nearest: nearest.clone(),
            })?;
            sim.learn(episode, t)?;
        } else {
            state = next_state;
        }
    }
    Ok(EpisodeMetrics::from_slots(episode, rows, n, cfg.scheduler.chi))
}
