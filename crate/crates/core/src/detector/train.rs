use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{dp_discriminator_gradient, interpolate, sample_latents, DiscBatch, DpConfig, GanModel};
use crate::nn::{self, adam_step, AdamConfig, AdamState, ParamVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub n_disc_iters: usize,
    pub n_local_iters: usize,
    pub gp_coeff: f64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 20, n_disc_iters: 6, n_local_iters: 20, gp_coeff: 10.0, adam: AdamConfig::gan() }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.n_disc_iters == 0 {
            return Err(Error::InvalidArgument("batch_size and n_disc_iters must be at least 1".into()));
        }
        if !(self.gp_coeff >= 0.0) {
            return Err(Error::InvalidArgument("gp_coeff must be non-negative".into()));
        }
        self.adam.validate()
    }
}

/// Adam moments for one UAV's generator and critic.
#[derive(Debug, Clone, PartialEq)]
pub struct GanOptim {
    pub gen: AdamState,
    pub disc: AdamState,
}

impl GanOptim {
    pub fn new(gan: &GanModel, adam: AdamConfig) -> Self {
        Self { gen: AdamState::new(gan.theta.len(), adam), disc: AdamState::new(gan.w.len(), adam) }
    }
}

/// Loss values observed during a local update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalStats {
    pub generator_steps: usize,
    pub critic_steps: usize,
}

/// Generator loss `-mean D(G(z))` and its gradient with respect to `theta`.
pub fn generator_gradient(gan: &GanModel, latents: &[Vec<f64>]) -> Result<(f64, ParamVector)> {
    if latents.is_empty() {
        return Err(Error::Empty("latent batch".into()));
    }
    let m = latents.len() as f64;
    let mut grad = ParamVector::zeros(gan.theta.len());
    let mut loss = 0.0;
    for z in latents {
        let t_gen = nn::forward_trace(&gan.gen_spec, gan.theta.as_slice(), z)?;
        let t_disc = nn::forward_trace(&gan.disc_spec, gan.w.as_slice(), t_gen.output())?;
        loss -= t_disc.output()[0] / m;
        let dx = nn::backward_input(&gan.disc_spec, gan.w.as_slice(), &t_disc, &[-1.0 / m])?;
        nn::backward_into(&gan.gen_spec, gan.theta.as_slice(), &t_gen, &dx, grad.as_mut_slice())?;
    }
    Ok((loss, grad))
}

fn generate_batch(gan: &GanModel, latents: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    latents.iter().map(|z| gan.generate(z)).collect()
}

/// Runs `n_local_iters` rounds of `n_disc_iters` private critic steps followed by
/// one generator step on `data`, returning the updated model.
///
/// Batches, latents and interpolation weights come from `rng`; DP noise comes
/// from `noise_rng`, so switching the noise off leaves the sampling sequence
/// untouched.
pub fn local_update<R: Rng + ?Sized, S: Rng + ?Sized>(
    gan: &GanModel,
    data: &[Vec<f64>],
    cfg: &TrainConfig,
    dp: &DpConfig,
    optim: &mut GanOptim,
    rng: &mut R,
    noise_rng: &mut S,
) -> Result<(GanModel, LocalStats)> {
    let mut model = gan.clone();
    let mut stats = LocalStats::default();
    if cfg.n_local_iters == 0 {
        return Ok((model, stats));
    }
    cfg.validate()?;
    dp.validate()?;
    let m = cfg.batch_size;
    if data.len() < m {
        return Err(Error::InvalidArgument(format!("{} samples cannot fill a batch of {m}", data.len())));
    }
    if data.iter().any(|r| r.len() != model.features()) {
        return Err(Error::Shape("training rows do not match the critic input width".into()));
    }
    let sigma = dp.sigma(m as f64 / data.len() as f64, cfg.n_disc_iters);

    for _ in 0..cfg.n_local_iters {
        for _ in 0..cfg.n_disc_iters {
            let latents = sample_latents(m, model.latent_dim, rng);
            let fake = generate_batch(&model, &latents)?;
            let real: Vec<Vec<f64>> = index::sample(rng, data.len(), m).iter().map(|i| data[i].clone()).collect();
            let interp = interpolate(&real, &fake, rng);
            let batch = DiscBatch { real, fake, interp };
            let grad = dp_discriminator_gradient(&model, &batch, cfg.gp_coeff, dp.clip_bound, sigma, noise_rng)?;
            adam_step(&mut model.w, grad.as_slice(), &mut optim.disc)?;
            stats.critic_steps += 1;
        }
        let latents = sample_latents(m, model.latent_dim, rng);
        let (_, grad) = generator_gradient(&model, &latents)?;
        adam_step(&mut model.theta, grad.as_slice(), &mut optim.gen)?;
        stats.generator_steps += 1;
    }
    Ok((model, stats))
}
