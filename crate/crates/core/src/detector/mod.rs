//! Differentially private WGAN-GP anomaly detector.

mod dp;
mod gan;
mod scoring;
mod train;

pub use dp::{dp_discriminator_gradient, noise_scale, per_sample_disc_grad, DpConfig};
pub use gan::{discriminator_loss, generator_loss, interpolate, sample_latents, DiscBatch, GanModel};
pub use scoring::{
    anomaly_score, calibrate_threshold, evaluate, score_against, score_all, AnomalyModel, InjectionConfig,
    MetricsReport,
};
pub use train::{generator_gradient, local_update, GanOptim, LocalStats, TrainConfig};
