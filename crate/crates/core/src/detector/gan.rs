use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::{self, Activation, MlpSpec, ParamVector};
use crate::{Error, Result};

/// Generator (`theta`) and critic (`w`) of one WGAN-GP detector.
#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    pub gen_spec: MlpSpec,
    pub disc_spec: MlpSpec,
    pub theta: ParamVector,
    pub w: ParamVector,
    pub latent_dim: usize,
}

impl GanModel {
    pub fn new(gen_spec: MlpSpec, disc_spec: MlpSpec, theta: ParamVector, w: ParamVector) -> Result<Self> {
        gen_spec.validate()?;
        disc_spec.validate()?;
        if gen_spec.output_width() != disc_spec.input_width() {
            return Err(Error::Shape(format!(
                "generator emits {} features, critic reads {}",
                gen_spec.output_width(),
                disc_spec.input_width()
            )));
        }
        if disc_spec.output_width() != 1 {
            return Err(Error::Shape("critic must have a scalar output".into()));
        }
        if theta.len() != gen_spec.param_count() || w.len() != disc_spec.param_count() {
            return Err(Error::Shape("parameter vectors do not match the architectures".into()));
        }
        let latent_dim = gen_spec.input_width();
        Ok(Self { gen_spec, disc_spec, theta, w, latent_dim })
    }

    /// latent -> hidden... -> features (tanh hidden, linear out) and
    /// features -> hidden... -> 1 (leaky ReLU 0.2 hidden, linear out).
    pub fn with_architecture<R: Rng + ?Sized>(
        features: usize,
        latent_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let mut gw = vec![latent_dim];
        gw.extend_from_slice(hidden);
        gw.push(features);
        let mut dw = vec![features];
        dw.extend_from_slice(hidden);
        dw.push(1);
        let gen_spec = MlpSpec::new(gw, Activation::Tanh, Activation::Linear)?;
        let disc_spec = MlpSpec::new(dw, Activation::LeakyRelu(0.2), Activation::Linear)?;
        let theta = nn::init_params(&gen_spec, 1.0, rng);
        let w = nn::init_params(&disc_spec, 1.0, rng);
        Self::new(gen_spec, disc_spec, theta, w)
    }

    /// 10 -> 32 -> 32 -> features generator, features -> 32 -> 32 -> 1 critic.
    pub fn default_for<R: Rng + ?Sized>(features: usize, rng: &mut R) -> Result<Self> {
        Self::with_architecture(features, 10, &[32, 32], rng)
    }

    pub fn features(&self) -> usize {
        self.disc_spec.input_width()
    }

    pub fn generate(&self, z: &[f64]) -> Result<Vec<f64>> {
        nn::forward(&self.gen_spec, &self.theta, z)
    }

    pub fn critic(&self, x: &[f64]) -> Result<f64> {
        Ok(nn::forward(&self.disc_spec, &self.w, x)?[0])
    }

    pub fn same_architecture(&self, other: &GanModel) -> bool {
        self.gen_spec == other.gen_spec && self.disc_spec == other.disc_spec
    }
}

pub fn sample_latents<R: Rng + ?Sized>(count: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

/// `u * real + (1 - u) * fake` with one `u ~ U(0, 1)` per row.
pub fn interpolate<R: Rng + ?Sized>(real: &[Vec<f64>], fake: &[Vec<f64>], rng: &mut R) -> Vec<Vec<f64>> {
    real.iter()
        .zip(fake)
        .map(|(r, f)| {
            let u: f64 = rng.random();
            r.iter().zip(f).map(|(a, b)| u * a + (1.0 - u) * b).collect()
        })
        .collect()
}

/// Real, generated and interpolated rows for one critic step.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscBatch {
    pub real: Vec<Vec<f64>>,
    pub fake: Vec<Vec<f64>>,
    pub interp: Vec<Vec<f64>>,
}

impl DiscBatch {
    pub fn len(&self) -> usize {
        self.real.len()
    }

    pub fn is_empty(&self) -> bool {
        self.real.is_empty()
    }

    pub(crate) fn check(&self, features: usize) -> Result<()> {
        if self.real.is_empty() {
            return Err(Error::Empty("critic batch".into()));
        }
        if self.fake.len() != self.real.len() || self.interp.len() != self.real.len() {
            return Err(Error::Shape("real, fake and interpolated batches differ in size".into()));
        }
        let rows = self.real.iter().chain(&self.fake).chain(&self.interp);
        if rows.into_iter().any(|r| r.len() != features) {
            return Err(Error::Shape(format!("batch rows must have {features} features")));
        }
        Ok(())
    }
}

fn input_grad_norm(gan: &GanModel, x: &[f64]) -> Result<f64> {
    let g = nn::grad_input(&gan.disc_spec, &gan.w, x)?;
    Ok(g.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Critic loss `mean_i [D(fake_i) - D(real_i) + coeff (|grad D(interp_i)| - 1)^2]`.
pub fn discriminator_loss(gan: &GanModel, batch: &DiscBatch, gp_coeff: f64) -> Result<f64> {
    batch.check(gan.features())?;
    let mut total = 0.0;
    for i in 0..batch.len() {
        let norm = input_grad_norm(gan, &batch.interp[i])?;
        total += gan.critic(&batch.fake[i])? - gan.critic(&batch.real[i])? + gp_coeff * (norm - 1.0).powi(2);
    }
    Ok(total / batch.len() as f64)
}

/// Generator loss `-mean_i D(fake_i)`.
pub fn generator_loss(gan: &GanModel, fake: &[Vec<f64>]) -> Result<f64> {
    if fake.is_empty() {
        return Err(Error::Empty("generated batch".into()));
    }
    let mut total = 0.0;
    for x in fake {
        total += gan.critic(x)?;
    }
    Ok(-total / fake.len() as f64)
}
