use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sample_latents, GanModel};
use crate::dataset::inject_anomalies;
use crate::nn::{MlpSpec, ParamVector};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct DetectorMeta {
    gen_spec: MlpSpec,
    disc_spec: MlpSpec,
    threshold: f64,
    score_weight: f64,
    latent_search_count: usize,
}

/// Trained detector plus its decision rule.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyModel {
    pub gan: GanModel,
    pub threshold: f64,
    /// Weight of the reconstruction residual; the critic term gets `1 - weight`.
    pub score_weight: f64,
    pub latent_search_count: usize,
}

impl AnomalyModel {
    pub fn new(gan: GanModel) -> Self {
        Self { gan, threshold: 0.0, score_weight: 0.9, latent_search_count: 64 }
    }

    /// Writes `detector.json` plus generator and critic parameter files.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let meta = DetectorMeta {
            gen_spec: self.gan.gen_spec.clone(),
            disc_spec: self.gan.disc_spec.clone(),
            threshold: self.threshold,
            score_weight: self.score_weight,
            latent_search_count: self.latent_search_count,
        };
        fs::write(dir.join("detector.json"), serde_json::to_string_pretty(&meta)?)?;
        self.gan.theta.save(dir.join("generator.afpv"))?;
        self.gan.w.save(dir.join("critic.afpv"))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: DetectorMeta = serde_json::from_str(&fs::read_to_string(dir.join("detector.json"))?)?;
        let theta = ParamVector::load(dir.join("generator.afpv"))?;
        let w = ParamVector::load(dir.join("critic.afpv"))?;
        let gan = GanModel::new(meta.gen_spec, meta.disc_spec, theta, w)
            .map_err(|e| Error::Checkpoint(format!("detector parameters: {e}")))?;
        Ok(Self { gan, threshold: meta.threshold, score_weight: meta.score_weight, latent_search_count: meta.latent_search_count })
    }

    fn reference_set<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        if self.score_weight == 0.0 {
            return Ok(Vec::new());
        }
        if self.latent_search_count == 0 {
            return Err(Error::InvalidArgument("latent_search_count must be positive".into()));
        }
        sample_latents(self.latent_search_count, self.gan.latent_dim, rng)
            .iter()
            .map(|z| self.gan.generate(z))
            .collect()
    }
}

/// Score of `x` against a fixed set of generated samples:
/// `w * min_j |G(z_j) - x|_1 + (1 - w) * (-D(x))`.
pub fn score_against(model: &AnomalyModel, x: &[f64], generated: &[Vec<f64>]) -> Result<f64> {
    let w = model.score_weight;
    let critic = -model.gan.critic(x)?;
    if w == 0.0 {
        return Ok(critic);
    }
    let residual = generated
        .iter()
        .map(|g| g.iter().zip(x).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok(w * residual + (1.0 - w) * critic)
}

/// Anomaly score of one point, searching `latent_search_count` fresh latents.
pub fn anomaly_score<R: Rng + ?Sized>(model: &AnomalyModel, x: &[f64], rng: &mut R) -> Result<f64> {
    let generated = model.reference_set(rng)?;
    score_against(model, x, &generated)
}

/// Scores every row against one shared set of generated samples.
pub fn score_all<R: Rng + ?Sized>(model: &AnomalyModel, rows: &[Vec<f64>], rng: &mut R) -> Result<Vec<f64>> {
    let generated = model.reference_set(rng)?;
    rows.iter().map(|x| score_against(model, x, &generated)).collect()
}

/// How validation data is perturbed to stand in for anomalies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InjectionConfig {
    pub fraction: f64,
    /// Noise standard deviation as a multiple of each feature's training std.
    pub magnitude: f64,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        Self { fraction: 0.5, magnitude: 3.0 }
    }
}

/// Midpoint `(A_normal + A_abnormal) / 2`, where `A_normal` is the mean score of
/// the clean validation rows and `A_abnormal` the mean score of the rows that
/// received injected noise in a perturbed copy.
pub fn calibrate_threshold<R: Rng + ?Sized>(
    model: &AnomalyModel,
    validation: &[Vec<f64>],
    injection: &InjectionConfig,
    feature_stds: &[f64],
    rng: &mut R,
) -> Result<f64> {
    if validation.is_empty() {
        return Err(Error::Empty("validation set".into()));
    }
    let (perturbed, labels) =
        inject_anomalies(validation, injection.fraction, injection.magnitude, feature_stds, rng)?;
    let generated = model.reference_set(rng)?;
    let mut normal = 0.0;
    for x in validation {
        normal += score_against(model, x, &generated)?;
    }
    let normal = normal / validation.len() as f64;
    let mut abnormal = 0.0;
    let mut count = 0usize;
    for (x, _) in perturbed.iter().zip(&labels).filter(|(_, l)| **l) {
        abnormal += score_against(model, x, &generated)?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidArgument("injection produced no abnormal rows".into()));
    }
    Ok(0.5 * (normal + abnormal / count as f64))
}

/// Detection counts and the derived precision, recall and F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
}

impl MetricsReport {
    pub fn from_counts(true_pos: usize, false_pos: usize, false_neg: usize, true_neg: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(true_pos, true_pos + false_pos);
        let recall = ratio(true_pos, true_pos + false_neg);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { precision, recall, f1, true_pos, false_pos, false_neg, true_neg }
    }

    /// Flags `score > threshold` as abnormal; `labels` are true for abnormal rows.
    pub fn from_scores(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let (mut tp, mut fp, mut fneg, mut tn) = (0, 0, 0, 0);
        for (s, &abnormal) in scores.iter().zip(labels) {
            match (*s > threshold, abnormal) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => tn += 1,
            }
        }
        Self::from_counts(tp, fp, fneg, tn)
    }
}

pub fn evaluate<R: Rng + ?Sized>(
    model: &AnomalyModel,
    test: &[Vec<f64>],
    labels: &[bool],
    rng: &mut R,
) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::Empty("test set".into()));
    }
    if test.len() != labels.len() {
        return Err(Error::Shape("one label per test row required".into()));
    }
    let scores = score_all(model, test, rng)?;
    Ok(MetricsReport::from_scores(&scores, labels, model.threshold))
}
