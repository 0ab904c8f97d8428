use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SensorRecord;
use crate::{Error, Result};

/// Per-feature z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Population statistics; constant features get a unit std.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::Empty("normalizer fit".into()))?;
        let d = first.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("rows of unequal width".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let std = var
            .into_iter()
            .zip(&mean)
            .map(|(v, m)| if v.sqrt() > 1e-12 * m.abs().max(1.0) { v.sqrt() } else { 1.0 })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| v * s + m).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.7, validation: 0.15, test: 0.15 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !(*p > 0.0)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("split ratios must be positive and sum to 1, got {parts:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDatasets {
    /// Training records with normalized features, kept whole so they can be
    /// replayed as per-device streams.
    pub train_records: Vec<SensorRecord>,
    pub train: Vec<Vec<f64>>,
    pub validation: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
    /// True marks an abnormal test row.
    pub test_labels: Vec<bool>,
    pub normalizer: Normalizer,
}

impl SplitDatasets {
    /// Replaces the clean test rows by a copy with injected anomalies.
    pub fn label_test<R: Rng + ?Sized>(&mut self, fraction: f64, magnitude: f64, rng: &mut R) -> Result<()> {
        let unit = vec![1.0; self.normalizer.mean.len()];
        let clean: Vec<Vec<f64>> = self.test.clone();
        let (rows, labels) = inject_anomalies(&clean, fraction, magnitude, &unit, rng)?;
        self.test = rows;
        self.test_labels = labels;
        Ok(())
    }
}

/// Chronological split; normalization is fit on the training part only.
pub fn split(records: &[SensorRecord], ratios: SplitRatios) -> Result<SplitDatasets> {
    ratios.validate()?;
    if records.len() < 10 {
        return Err(Error::InvalidArgument(format!("need at least 10 records to split, got {}", records.len())));
    }
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    let n = sorted.len();
    let n_train = (ratios.train * n as f64).round() as usize;
    let n_val = (ratios.validation * n as f64).round() as usize;
    let n_train = n_train.clamp(1, n - 2);
    let n_val = n_val.clamp(1, n - n_train - 1);

    let raw_train: Vec<Vec<f64>> = sorted[..n_train].iter().map(|r| r.features.to_vec()).collect();
    let normalizer = Normalizer::fit(&raw_train)?;
    let norm = |rs: &[SensorRecord]| -> Vec<Vec<f64>> { rs.iter().map(|r| normalizer.normalize(&r.features)).collect() };
    let train = norm(&sorted[..n_train]);
    let validation = norm(&sorted[n_train..n_train + n_val]);
    let test = norm(&sorted[n_train + n_val..]);
    let train_records = sorted[..n_train]
        .iter()
        .zip(&train)
        .map(|(r, z)| SensorRecord { features: z.as_slice().try_into().unwrap(), ..r.clone() })
        .collect();
    let test_labels = vec![false; test.len()];
    Ok(SplitDatasets { train_records, train, validation, test, test_labels, normalizer })
}

/// Adds Gaussian noise with per-feature std `magnitude * feature_stds[j]` to
/// exactly `round(fraction * n)` rows chosen uniformly without replacement.
pub fn inject_anomalies<R: Rng + ?Sized>(
    rows: &[Vec<f64>],
    fraction: f64,
    magnitude: f64,
    feature_stds: &[f64],
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("fraction must lie in [0, 1], got {fraction}")));
    }
    if !(magnitude >= 0.0) {
        return Err(Error::InvalidArgument(format!("magnitude must be non-negative, got {magnitude}")));
    }
    if rows.iter().any(|r| r.len() != feature_stds.len()) {
        return Err(Error::Shape("one std per feature required".into()));
    }
    let n = rows.len();
    let count = (fraction * n as f64).round() as usize;
    let mut out = rows.to_vec();
    let mut labels = vec![false; n];
    let mut chosen = index::sample(rng, n, count).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        labels[i] = true;
        for (v, s) in out[i].iter_mut().zip(feature_stds) {
            let z: f64 = rng.sample(StandardNormal);
            *v += magnitude * s * z;
        }
    }
    Ok((out, labels))
}
