use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mdp::{discrete_dim, random_discrete_action, state_dim, DiscreteAction, Experience};
use super::nets::{concat, policy_gradient, regression_step, scalar};
use super::CostWeights;
use crate::env::{Association, WorldState};
use crate::nn::{self, AdamConfig, AdamState, Activation, MlpSpec, ParamVector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ca2cConfig {
    pub hidden: Vec<usize>,
    pub tau: f64,
    pub epsilon_explore: f64,
    /// Discount factor.
    pub chi: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub weights: CostWeights,
    pub energy_penalty_coeff: f64,
    /// Slots per episode.
    pub slots: usize,
    pub adam: AdamConfig,
    /// Scale of the actor's last-layer initialization; small values start
    /// the policy near zero displacement.
    pub actor_final_scale: f64,
    /// Std of the Gaussian exploration noise of the DDPG baseline.
    pub ddpg_noise_std: f64,
}

impl Default for Ca2cConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            tau: 0.005,
            epsilon_explore: 0.1,
            chi: 0.9,
            batch_size: 64,
            replay_capacity: 2000,
            weights: CostWeights::default(),
            energy_penalty_coeff: 0.01,
            slots: 50,
            adam: AdamConfig::rl(),
            actor_final_scale: 3e-3,
            ddpg_noise_std: 0.1,
        }
    }
}

impl Ca2cConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return bad(format!("chi must lie in (0, 1), got {}", self.chi));
        }
        if !(0.0..=1.0).contains(&self.epsilon_explore) {
            return bad(format!("epsilon_explore must lie in [0, 1], got {}", self.epsilon_explore));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("need 0 < batch_size <= replay_capacity".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden widths must be nonempty and positive".into());
        }
        if !(self.energy_penalty_coeff >= 0.0 && self.ddpg_noise_std >= 0.0 && self.actor_final_scale > 0.0) {
            return bad("energy_penalty_coeff, ddpg_noise_std must be >= 0 and actor_final_scale > 0".into());
        }
        self.adam.validate()
    }
}

/// Network sizes implied by the number of devices and UAVs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_devices: usize,
    pub n_uavs: usize,
}

impl Dims {
    pub fn state(&self) -> usize {
        state_dim(self.n_devices, self.n_uavs)
    }

    pub fn discrete(&self) -> usize {
        discrete_dim(self.n_devices, self.n_uavs)
    }

    pub fn continuous(&self) -> usize {
        2 * self.n_uavs
    }
}

pub(crate) fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

/// State and discrete action encoding shared by the actor and critic inputs.
pub fn discrete_input(state: &[f64], action: &DiscreteAction, n_uavs: usize) -> Vec<f64> {
    let mut x = state.to_vec();
    action.encode_into(n_uavs, &mut x);
    x
}

/// Online and target actor/critic pairs with their optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct Ca2cAgent {
    pub dims: Dims,
    pub actor_spec: MlpSpec,
    pub critic_spec: MlpSpec,
    pub actor: ParamVector,
    pub critic: ParamVector,
    pub target_actor: ParamVector,
    pub target_critic: ParamVector,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
}

#[derive(Serialize, Deserialize)]
struct AgentMeta {
    dims: Dims,
    actor_spec: MlpSpec,
    critic_spec: MlpSpec,
}

impl Ca2cAgent {
    pub fn new<R: Rng + ?Sized>(dims: Dims, cfg: &Ca2cConfig, rng: &mut R) -> Result<Self> {
        let input = dims.state() + dims.discrete();
        let actor_spec = MlpSpec::new(widths(input, &cfg.hidden, dims.continuous()), Activation::Relu, Activation::Tanh)?;
        let critic_spec =
            MlpSpec::new(widths(input + dims.continuous(), &cfg.hidden, 1), Activation::Relu, Activation::Linear)?;
        let actor = nn::init_params(&actor_spec, cfg.actor_final_scale, rng);
        let critic = nn::init_params(&critic_spec, 1.0, rng);
        Ok(Self {
            dims,
            actor_opt: AdamState::new(actor.len(), cfg.adam),
            critic_opt: AdamState::new(critic.len(), cfg.adam),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor_spec,
            critic_spec,
            actor,
            critic,
        })
    }

    /// Normalized displacement `pi_c(a_d | s)` in [-1, 1]^(2N).
    pub fn policy(&self, params: &ParamVector, state: &[f64], action: &DiscreteAction) -> Result<Vec<f64>> {
        nn::forward(&self.actor_spec, params, &discrete_input(state, action, self.dims.n_uavs))
    }

    /// `Q(s, [a_d, pi_c(a_d | s)])` using the given actor and critic parameters.
    pub fn q_of(&self, actor: &ParamVector, critic: &ParamVector, state: &[f64], action: &DiscreteAction) -> Result<f64> {
        let x = discrete_input(state, action, self.dims.n_uavs);
        let u = nn::forward(&self.actor_spec, actor, &x)?;
        scalar(&self.critic_spec, critic, &concat(&x, &u))
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let meta = AgentMeta { dims: self.dims, actor_spec: self.actor_spec.clone(), critic_spec: self.critic_spec.clone() };
        fs::write(dir.join("agent.json"), serde_json::to_string_pretty(&meta)?)?;
        self.actor.save(dir.join("actor.afpv"))?;
        self.critic.save(dir.join("critic.afpv"))?;
        self.target_actor.save(dir.join("target_actor.afpv"))?;
        self.target_critic.save(dir.join("target_critic.afpv"))
    }

    /// Restores networks; optimizer moments start fresh.
    pub fn load(dir: impl AsRef<Path>, adam: AdamConfig) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: AgentMeta = serde_json::from_str(&fs::read_to_string(dir.join("agent.json"))?)?;
        let actor = ParamVector::load(dir.join("actor.afpv"))?;
        let critic = ParamVector::load(dir.join("critic.afpv"))?;
        if actor.len() != meta.actor_spec.param_count() || critic.len() != meta.critic_spec.param_count() {
            return Err(Error::Checkpoint("parameter files do not match agent.json".into()));
        }
        Ok(Self {
            dims: meta.dims,
            actor_opt: AdamState::new(actor.len(), adam),
            critic_opt: AdamState::new(critic.len(), adam),
            target_actor: ParamVector::load(dir.join("target_actor.afpv"))?,
            target_critic: ParamVector::load(dir.join("target_critic.afpv"))?,
            actor_spec: meta.actor_spec,
            critic_spec: meta.critic_spec,
            actor,
            critic,
        })
    }
}

/// `Q(s, [a_d, a_c])` on the concatenated encoding.
pub fn critic_q(
    spec: &MlpSpec,
    params: &ParamVector,
    state: &[f64],
    action: &DiscreteAction,
    continuous: &[f64],
    n_uavs: usize,
) -> Result<f64> {
    scalar(spec, params, &concat(&discrete_input(state, action, n_uavs), continuous))
}

/// Target xy of every UAV: its current position plus the actor's output
/// scaled to the largest single-slot move.
pub fn actor_targets(
    agent: &Ca2cAgent,
    state: &[f64],
    action: &DiscreteAction,
    world: &WorldState,
    max_step: f64,
) -> Result<Vec<[f64; 2]>> {
    let u = agent.policy(&agent.actor, state, action)?;
    Ok(displacement_targets(world, &u, max_step))
}

pub fn displacement_targets(world: &WorldState, u: &[f64], max_step: f64) -> Vec<[f64; 2]> {
    world
        .uavs
        .iter()
        .enumerate()
        .map(|(n, uav)| [uav.position[0] + u[2 * n] * max_step, uav.position[1] + u[2 * n + 1] * max_step])
        .collect()
}

/// Approximate `argmax_{a_d} q(a_d)`: every nonempty selection (in increasing
/// bitmask order) is paired with one coordinate-ascent pass over devices,
/// started from `init`. A device moves to another option only on strict
/// improvement, scanning "unassociated" first and then feasible UAVs by id,
/// and a later selection replaces the incumbent only if strictly better.
pub fn factorized_argmax<F>(n_uavs: usize, feasible: &[Vec<usize>], init: &Association, mut q: F) -> Result<(DiscreteAction, f64)>
where
    F: FnMut(&DiscreteAction) -> Result<f64>,
{
    if n_uavs == 0 || n_uavs >= 64 {
        return Err(Error::InvalidArgument(format!("cannot enumerate selections of {n_uavs} uavs")));
    }
    let mut best: Option<(DiscreteAction, f64)> = None;
    for mask in 1u64..(1u64 << n_uavs) {
        let selection = (0..n_uavs).map(|i| mask >> i & 1 == 1).collect();
        let mut cur = DiscreteAction { association: init.clone(), selection };
        let mut cur_q = q(&cur)?;
        for (k, options) in feasible.iter().enumerate() {
            let keep = cur.association.get(k);
            let mut best_opt = keep;
            for opt in std::iter::once(None).chain(options.iter().map(|&n| Some(n))) {
                if opt == keep {
                    continue;
                }
                cur.association.set(k, opt);
                let v = q(&cur)?;
                if v > cur_q {
                    cur_q = v;
                    best_opt = opt;
                }
            }
            cur.association.set(k, best_opt);
        }
        if best.as_ref().is_none_or(|(_, b)| cur_q > *b) {
            best = Some((cur, cur_q));
        }
    }
    Ok(best.expect("at least one selection"))
}

/// Exact argmax by enumerating every association and nonempty selection.
/// Exponential in the number of devices; meant for checking small cases.
pub fn brute_force_argmax<F>(n_uavs: usize, feasible: &[Vec<usize>], mut q: F) -> Result<(DiscreteAction, f64)>
where
    F: FnMut(&DiscreteAction) -> Result<f64>,
{
    let mut best: Option<(DiscreteAction, f64)> = None;
    let mut digits = vec![0usize; feasible.len()];
    loop {
        let association = Association::new(
            digits.iter().zip(feasible).map(|(&d, o)| if d == 0 { None } else { Some(o[d - 1]) }).collect(),
        );
        for mask in 1u64..(1u64 << n_uavs) {
            let a = DiscreteAction { association: association.clone(), selection: (0..n_uavs).map(|i| mask >> i & 1 == 1).collect() };
            let v = q(&a)?;
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((a, v));
            }
        }
        let mut k = 0;
        loop {
            if k == digits.len() {
                return best.ok_or_else(|| Error::Empty("action space".into()));
            }
            digits[k] += 1;
            if digits[k] <= feasible[k].len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

/// Epsilon-greedy discrete action: uniform random with probability `epsilon`,
/// otherwise the factorized argmax of the online networks.
pub fn select_discrete_action<R: Rng + ?Sized>(
    agent: &Ca2cAgent,
    state: &[f64],
    feasible: &[Vec<usize>],
    init: &Association,
    epsilon: f64,
    rng: &mut R,
) -> Result<DiscreteAction> {
    if rng.random::<f64>() < epsilon {
        return Ok(random_discrete_action(feasible, agent.dims.n_uavs, rng));
    }
    let (a, _) = factorized_argmax(agent.dims.n_uavs, feasible, init, |a| agent.q_of(&agent.actor, &agent.critic, state, a))?;
    Ok(a)
}

/// One critic update on `batch`: next discrete actions chosen by the online
/// networks, bootstrapped values taken from the target networks. The target
/// critic is then soft-updated. Returns the loss before the step.
pub fn train_critic(agent: &mut Ca2cAgent, batch: &[&Experience], chi: f64, tau: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("minibatch".into()));
    }
    let n = agent.dims.n_uavs;
    let mut inputs = Vec::with_capacity(batch.len());
    let mut targets = Vec::with_capacity(batch.len());
    for e in batch {
        let (next, _) = factorized_argmax(n, &e.next_feasible, &e.next_nearest, |a| {
            agent.q_of(&agent.actor, &agent.critic, &e.next_state, a)
        })?;
        let bootstrap = agent.q_of(&agent.target_actor, &agent.target_critic, &e.next_state, &next)?;
        targets.push(e.reward + chi * bootstrap);
        inputs.push(concat(&discrete_input(&e.state, &e.action.discrete, n), &e.action.displacement));
    }
    let loss = regression_step(&agent.critic_spec, &mut agent.critic, &mut agent.critic_opt, &inputs, &targets)?;
    agent.target_critic.soft_update(&agent.critic, tau);
    Ok(loss)
}

/// Mean `Q(s, [a_d, pi_c(a_d|s)])` over the batch and the gradient of its
/// negation with respect to the actor parameters.
pub fn actor_gradient(agent: &Ca2cAgent, batch: &[&Experience]) -> Result<(f64, ParamVector)> {
    let inputs: Vec<Vec<f64>> =
        batch.iter().map(|e| discrete_input(&e.state, &e.action.discrete, agent.dims.n_uavs)).collect();
    policy_gradient(&agent.actor_spec, &agent.actor, &agent.critic_spec, &agent.critic, &inputs, &inputs)
}

/// One policy-gradient ascent step on the actor, then a soft update of its
/// target. Returns the objective before the step.
pub fn train_actor(agent: &mut Ca2cAgent, batch: &[&Experience], tau: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("minibatch".into()));
    }
    let (objective, grad) = actor_gradient(agent, batch)?;
    nn::adam_step(&mut agent.actor, grad.as_slice(), &mut agent.actor_opt)?;
    agent.target_actor.soft_update(&agent.actor, tau);
    Ok(objective)
}

/// Like [`train_actor`], but the critic is any function of the actor input
/// (state and discrete encoding) and the continuous action returning
/// `(Q, dQ/du)`.
pub fn train_actor_with<F>(agent: &mut Ca2cAgent, batch: &[&Experience], tau: f64, critic: F) -> Result<f64>
where
    F: Fn(&[f64], &[f64]) -> Result<(f64, Vec<f64>)>,
{
    if batch.is_empty() {
        return Err(Error::Empty("minibatch".into()));
    }
    let m = batch.len() as f64;
    let mut grad = ParamVector::zeros(agent.actor.len());
    let mut objective = 0.0;
    for e in batch {
        let x = discrete_input(&e.state, &e.action.discrete, agent.dims.n_uavs);
        let trace = nn::forward_trace(&agent.actor_spec, agent.actor.as_slice(), &x)?;
        let (q, dq_du) = critic(&x, trace.output())?;
        objective += q / m;
        let out_grad: Vec<f64> = dq_du.iter().map(|g| -g / m).collect();
        nn::backward_into(&agent.actor_spec, agent.actor.as_slice(), &trace, &out_grad, grad.as_mut_slice())?;
    }
    nn::adam_step(&mut agent.actor, grad.as_slice(), &mut agent.actor_opt)?;
    agent.target_actor.soft_update(&agent.actor, tau);
    Ok(objective)
}
