//! Run configuration: a TOML file whose every key is optional and defaults to
//! the reference scenario.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::SplitRatios;
use crate::detector::{DpConfig, InjectionConfig, TrainConfig};
use crate::env::{ChannelConfig, EnergyConfig, SensingConfig, WorldConfig};
use crate::federation::UavComputeConfig;
use crate::scheduler::{Algo, Ca2cConfig};
use crate::{Error, Result};

pub const SEED_ENV: &str = "AEROFED_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub score_weight: f64,
    pub latent_search_count: usize,
    pub calibration: InjectionConfig,
    /// Share of test rows that receive injected anomalies.
    pub test_fraction: f64,
    pub test_magnitude: f64,
    /// Held-out rows per UAV used for the per-slot loss.
    pub eval_batch_size: usize,
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            score_weight: 0.9,
            latent_search_count: 64,
            calibration: InjectionConfig::default(),
            test_fraction: 0.05,
            test_magnitude: 3.0,
            eval_batch_size: 64,
            latent_dim: 10,
            hidden: vec![32, 32],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub synthetic_records: usize,
    pub synthetic_motes: usize,
    pub split: SplitRatios,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { synthetic_records: 20_000, synthetic_motes: 54, split: SplitRatios::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub algo: Algo,
    pub episodes: usize,
    /// Unset means: fall back to the environment, then to 0.
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    /// A trace file path, or `synthetic`.
    pub dataset: String,
    pub parallel: bool,
    /// Evaluate detection every this many episodes; 0 only after the last one.
    pub eval_every: usize,
    pub checkpoints: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            algo: Algo::Ca2cAfl,
            episodes: 200,
            seed: None,
            output_dir: PathBuf::from("runs/default"),
            dataset: "synthetic".into(),
            parallel: false,
            eval_every: 0,
            checkpoints: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub world: WorldConfig,
    pub channel: ChannelConfig,
    pub energy: EnergyConfig,
    pub sensing: SensingConfig,
    pub compute: UavComputeConfig,
    pub training: TrainConfig,
    pub dp: DpConfig,
    pub scheduler: Ca2cConfig,
    pub detector: DetectorConfig,
    pub dataset: DatasetConfig,
    pub run: RunSection,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.sensing.validate()?;
        self.compute.validate()?;
        self.training.validate()?;
        self.dp.validate()?;
        self.scheduler.validate()?;
        self.dataset.split.validate()?;
        let c = &self.channel;
        for (name, v) in [
            ("channel.carrier_hz", c.carrier_hz),
            ("channel.lightspeed_m_s", c.lightspeed_m_s),
            ("channel.uplink_bw_hz", c.uplink_bw_hz),
            ("channel.downlink_bw_hz", c.downlink_bw_hz),
            ("channel.uav_tx_w", c.uav_tx_w),
            ("channel.haps_tx_w", c.haps_tx_w),
            ("channel.noise_psd_w_hz", c.noise_psd_w_hz),
            ("energy.velocity_m_s", self.energy.velocity_m_s),
            ("energy.e_max_j", self.energy.e_max_j),
            ("energy.g_param", self.energy.g_param),
        ] {
            positive(name, v)?;
        }
        if c.haps_position[2] <= self.world.altitude_m {
            return Err(Error::InvalidArgument("the HAPS must fly above the UAVs".into()));
        }
        let d = &self.detector;
        if !(0.0..=1.0).contains(&d.score_weight) {
            return Err(Error::InvalidArgument(format!("detector.score_weight must lie in [0, 1], got {}", d.score_weight)));
        }
        if d.latent_search_count == 0 || d.eval_batch_size == 0 || d.latent_dim == 0 || d.hidden.contains(&0) {
            return Err(Error::InvalidArgument("detector sizes must be positive".into()));
        }
        for (name, f) in [("detector.calibration.fraction", d.calibration.fraction), ("detector.test_fraction", d.test_fraction)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {f}")));
            }
        }
        if self.run.dataset.is_empty() {
            return Err(Error::InvalidArgument("run.dataset must be a path or `synthetic`".into()));
        }
        Ok(())
    }

    /// Seed from the file, else from `AEROFED_SEED`, else 0.
    pub fn resolved_seed(&self) -> Result<u64> {
        if let Some(s) = self.run.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| Error::Config { path: SEED_ENV.into(), message: format!("`{v}` is not an integer") }),
            Err(_) => Ok(0),
        }
    }

    pub fn uses_synthetic_data(&self) -> bool {
        self.run.dataset == "synthetic"
    }
}

/// Parses TOML text, filling defaults and validating. Errors carry the dotted
/// path of the offending key.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Config { path: String::new(), message: e.to_string() })?;
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}
