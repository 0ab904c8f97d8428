use rand::Rng;
use rand_distr::StandardNormal;

use super::ca2c::{discrete_input, factorized_argmax, widths, Ca2cConfig, Dims};
use super::mdp::{random_discrete_action, DiscreteAction, Experience};
use super::nets::{concat, policy_gradient, regression_step, scalar};
use crate::env::Association;
use crate::nn::{self, AdamState, Activation, MlpSpec, ParamVector};
use crate::{Error, Result};

/// Q-network over (state, discrete action); trajectories are not learned.
#[derive(Debug, Clone, PartialEq)]
pub struct DqnAgent {
    pub dims: Dims,
    pub spec: MlpSpec,
    pub q: ParamVector,
    pub target_q: ParamVector,
    pub opt: AdamState,
}

impl DqnAgent {
    pub fn new<R: Rng + ?Sized>(dims: Dims, cfg: &Ca2cConfig, rng: &mut R) -> Result<Self> {
        let spec = MlpSpec::new(widths(dims.state() + dims.discrete(), &cfg.hidden, 1), Activation::Relu, Activation::Linear)?;
        let q = nn::init_params(&spec, 1.0, rng);
        Ok(Self { dims, opt: AdamState::new(q.len(), cfg.adam), target_q: q.clone(), spec, q })
    }

    pub fn value(&self, params: &ParamVector, state: &[f64], a: &DiscreteAction) -> Result<f64> {
        scalar(&self.spec, params, &discrete_input(state, a, self.dims.n_uavs))
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        feasible: &[Vec<usize>],
        init: &Association,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<DiscreteAction> {
        if rng.random::<f64>() < epsilon {
            return Ok(random_discrete_action(feasible, self.dims.n_uavs, rng));
        }
        Ok(factorized_argmax(self.dims.n_uavs, feasible, init, |a| self.value(&self.q, state, a))?.0)
    }

    /// Regression toward `r + chi * max_a' Q_target(s', a')`, then a soft target update.
    pub fn train(&mut self, batch: &[&Experience], chi: f64, tau: f64) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("minibatch".into()));
        }
        let n = self.dims.n_uavs;
        let mut inputs = Vec::with_capacity(batch.len());
        let mut targets = Vec::with_capacity(batch.len());
        for e in batch {
            let (_, best) = factorized_argmax(n, &e.next_feasible, &e.next_nearest, |a| {
                self.value(&self.target_q, &e.next_state, a)
            })?;
            targets.push(e.reward + chi * best);
            inputs.push(discrete_input(&e.state, &e.action.discrete, n));
        }
        let loss = regression_step(&self.spec, &mut self.q, &mut self.opt, &inputs, &targets)?;
        self.target_q.soft_update(&self.q, tau);
        Ok(loss)
    }
}

/// Deterministic trajectory policy with a state-only actor.
#[derive(Debug, Clone, PartialEq)]
pub struct DdpgAgent {
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

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(dims: Dims, cfg: &Ca2cConfig, rng: &mut R) -> Result<Self> {
        let actor_spec = MlpSpec::new(widths(dims.state(), &cfg.hidden, dims.continuous()), Activation::Relu, Activation::Tanh)?;
        let critic_spec =
            MlpSpec::new(widths(dims.state() + dims.continuous(), &cfg.hidden, 1), Activation::Relu, Activation::Linear)?;
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

    /// Actor output plus clipped Gaussian exploration noise.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], noise_std: f64, rng: &mut R) -> Result<Vec<f64>> {
        let mut u = nn::forward(&self.actor_spec, &self.actor, state)?;
        if noise_std > 0.0 {
            for v in &mut u {
                let z: f64 = rng.sample(StandardNormal);
                *v = (*v + noise_std * z).clamp(-1.0, 1.0);
            }
        }
        Ok(u)
    }

    pub fn train(&mut self, batch: &[&Experience], chi: f64, tau: f64) -> Result<(f64, f64)> {
        if batch.is_empty() {
            return Err(Error::Empty("minibatch".into()));
        }
        let mut inputs = Vec::with_capacity(batch.len());
        let mut targets = Vec::with_capacity(batch.len());
        for e in batch {
            let u_next = nn::forward(&self.actor_spec, &self.target_actor, &e.next_state)?;
            targets.push(e.reward + chi * scalar(&self.critic_spec, &self.target_critic, &concat(&e.next_state, &u_next))?);
            inputs.push(concat(&e.state, &e.action.displacement));
        }
        let critic_loss = regression_step(&self.critic_spec, &mut self.critic, &mut self.critic_opt, &inputs, &targets)?;
        self.target_critic.soft_update(&self.critic, tau);

        let states: Vec<Vec<f64>> = batch.iter().map(|e| e.state.clone()).collect();
        let (objective, grad) =
            policy_gradient(&self.actor_spec, &self.actor, &self.critic_spec, &self.critic, &states, &states)?;
        nn::adam_step(&mut self.actor, grad.as_slice(), &mut self.actor_opt)?;
        self.target_actor.soft_update(&self.actor, tau);
        Ok((critic_loss, objective))
    }
}
