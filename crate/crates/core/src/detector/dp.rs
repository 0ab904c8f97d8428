use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DiscBatch, GanModel};
use crate::nn::{self, ParamVector};
use crate::{Error, Result};

/// Privacy budget and clipping bound for the critic updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpConfig {
    pub epsilon_dp: f64,
    pub delta_dp: f64,
    /// Per-sample L2 bound `c_g`; `inf` disables clipping.
    pub clip_bound: f64,
    /// Fixed noise scale; when absent it is derived from the budget each update.
    pub noise_scale: Option<f64>,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self { epsilon_dp: 10.0, delta_dp: 1e-5, clip_bound: 1.0, noise_scale: None }
    }
}

impl DpConfig {
    /// No clipping and no noise: plain WGAN-GP.
    pub fn disabled() -> Self {
        Self { clip_bound: f64::INFINITY, noise_scale: Some(0.0), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_dp > 0.0) {
            return Err(Error::InvalidArgument("epsilon_dp must be positive".into()));
        }
        if !(self.delta_dp > 0.0 && self.delta_dp < 1.0) {
            return Err(Error::InvalidArgument("delta_dp must lie in (0, 1)".into()));
        }
        if !(self.clip_bound > 0.0) {
            return Err(Error::InvalidArgument("clip_bound must be positive".into()));
        }
        if let Some(s) = self.noise_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument("noise_scale must be finite and non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn sigma(&self, sampling_rate: f64, n_disc_iters: usize) -> f64 {
        self.noise_scale
            .unwrap_or_else(|| noise_scale(sampling_rate, n_disc_iters, self.delta_dp, self.epsilon_dp))
    }
}

/// Noise scale giving (epsilon, delta)-DP for the critic: `2 p sqrt(N_d ln(1/delta)) / epsilon`.
pub fn noise_scale(sampling_rate: f64, n_disc_iters: usize, delta: f64, epsilon: f64) -> f64 {
    2.0 * sampling_rate * (n_disc_iters as f64 * (1.0 / delta).ln()).sqrt() / epsilon
}

/// Adds the parameter gradient of one critic-loss term
/// `D(fake) - D(real) + coeff (|grad D(interp)| - 1)^2` into `out`.
pub fn per_sample_disc_grad(
    gan: &GanModel,
    real: &[f64],
    fake: &[f64],
    interp: &[f64],
    gp_coeff: f64,
    out: &mut [f64],
) -> Result<()> {
    let w = gan.w.as_slice();
    let t_fake = nn::forward_trace(&gan.disc_spec, w, fake)?;
    nn::backward_into(&gan.disc_spec, w, &t_fake, &[1.0], out)?;
    let t_real = nn::forward_trace(&gan.disc_spec, w, real)?;
    nn::backward_into(&gan.disc_spec, w, &t_real, &[-1.0], out)?;
    nn::gp_penalty_into(&gan.disc_spec, w, interp, gp_coeff, out)?;
    Ok(())
}

/// Critic gradient with per-sample clipping to `clip_bound` and Gaussian noise:
/// `(1/m) sum_i [clip(g_i) + N(0, sigma^2 c_g^2 I)]`, i.e. the clipped mean plus
/// noise of standard deviation `sigma c_g / sqrt(m)` per coordinate.
pub fn dp_discriminator_gradient<R: Rng + ?Sized>(
    gan: &GanModel,
    batch: &DiscBatch,
    gp_coeff: f64,
    clip_bound: f64,
    sigma: f64,
    noise_rng: &mut R,
) -> Result<ParamVector> {
    batch.check(gan.features())?;
    let m = batch.len();
    let n_params = gan.w.len();
    let mut total = vec![0.0; n_params];
    let mut sample = vec![0.0; n_params];
    for i in 0..m {
        sample.iter_mut().for_each(|v| *v = 0.0);
        per_sample_disc_grad(gan, &batch.real[i], &batch.fake[i], &batch.interp[i], gp_coeff, &mut sample)?;
        let norm = sample.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFinite("per-sample critic gradient".into()));
        }
        if norm > clip_bound {
            let s = clip_bound / norm;
            sample.iter_mut().for_each(|v| *v *= s);
        }
        for (t, g) in total.iter_mut().zip(&sample) {
            *t += g;
        }
    }
    let inv_m = 1.0 / m as f64;
    total.iter_mut().for_each(|v| *v *= inv_m);
    if sigma > 0.0 {
        if !clip_bound.is_finite() {
            return Err(Error::InvalidArgument("noise needs a finite clip bound".into()));
        }
        let std = sigma * clip_bound / (m as f64).sqrt();
        for t in total.iter_mut() {
            let z: f64 = noise_rng.sample(StandardNormal);
            *t += std * z;
        }
    }
    Ok(ParamVector(total))
}
