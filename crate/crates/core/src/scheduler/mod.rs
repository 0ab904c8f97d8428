//! Scheduling MDP, system cost, the compound-action actor-critic and the
//! comparison policies.

mod baselines;
mod ca2c;
mod cost;
mod episode;
mod mdp;
mod nets;

pub use baselines::{DdpgAgent, DqnAgent};
pub use ca2c::{
    actor_gradient, actor_targets, brute_force_argmax, critic_q, discrete_input, displacement_targets, factorized_argmax,
    select_discrete_action, train_actor, train_actor_with, train_critic, Ca2cAgent, Ca2cConfig, Dims,
};
pub use cost::{energy_penalty, reward, system_cost, CostWeights};
pub use episode::{
    coerce_selection, make_baseline, make_policy, run_episode, Algo, EpisodeMetrics, Policy, SimConfig, Simulation,
    SlotMetrics,
};
pub use mdp::{
    discrete_dim, feasible_uavs, nearest_association, observe, random_discrete_action, random_displacement, state_dim,
    Action, DiscreteAction, Experience, ReplayBuffer,
};
