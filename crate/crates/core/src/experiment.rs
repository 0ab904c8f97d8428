//! End-to-end runs: data preparation, the episode loop, detection
//! evaluation and the files a run leaves behind.

use std::fs::{self, File};
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset::{
    assign_motes_to_devices, load_records, split, synthesize, DeviceStreams, SplitDatasets, BUFFER_CAPACITY,
};
use crate::detector::{calibrate_threshold, evaluate, AnomalyModel, GanModel, MetricsReport};
use crate::federation::{EvalBatch, FedState, RoundConfig};
use crate::rng::Streams;
use crate::scheduler::{run_episode, Algo, EpisodeMetrics, Policy, SimConfig, Simulation, SlotMetrics};
use crate::{Error, Result};

/// Split data plus the per-device training streams.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub split: SplitDatasets,
    pub devices: DeviceStreams,
    pub skipped_lines: usize,
}

pub fn prepare_data(cfg: &RunConfig, streams: &Streams) -> Result<PreparedData> {
    let (records, skipped_lines) = if cfg.uses_synthetic_data() {
        let recs = synthesize(cfg.dataset.synthetic_records, cfg.dataset.synthetic_motes, &mut streams.global("synthesize"));
        (recs, 0)
    } else {
        let out = load_records(&cfg.run.dataset)?;
        (out.records, out.skipped)
    };
    let mut split = split(&records, cfg.dataset.split)?;
    split.label_test(cfg.detector.test_fraction, cfg.detector.test_magnitude, &mut streams.global("test_labels"))?;
    let per_device = assign_motes_to_devices(&split.train_records, cfg.world.n_devices, &mut streams.global("motes"))?;
    let devices = DeviceStreams::from_records(&per_device)?;
    Ok(PreparedData { split, devices, skipped_lines })
}

pub fn sim_config(cfg: &RunConfig) -> SimConfig {
    SimConfig {
        world: cfg.world.clone(),
        sensing: cfg.sensing,
        round: RoundConfig {
            compute: cfg.compute,
            train: cfg.training,
            dp: cfg.dp,
            channel: cfg.channel,
            energy: cfg.energy,
            federated: true,
            parallel: cfg.run.parallel,
        },
        scheduler: cfg.scheduler.clone(),
    }
}

pub fn build_simulation(cfg: &RunConfig, algo: Algo, streams: Streams, data: &PreparedData) -> Result<Simulation> {
    let d = &cfg.detector;
    let features = data.split.normalizer.mean.len();
    let global = GanModel::with_architecture(features, d.latent_dim, &d.hidden, &mut streams.global("gan_init"))?;
    let eval = (0..cfg.world.n_uavs)
        .map(|n| {
            EvalBatch::sample(&data.split.validation, d.eval_batch_size, d.latent_dim, &mut streams.stream("eval_batch", 0, 0, n as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let fed = FedState::new(global, eval, BUFFER_CAPACITY, cfg.training.adam);
    Simulation::new(sim_config(cfg), algo, streams, fed, data.devices.clone())
}

/// Calibrates and evaluates the models a scheme ends up with: the global model
/// for federated schemes, each UAV's own model (metrics averaged) for standalone.
pub fn evaluate_detection(
    sim: &Simulation,
    cfg: &RunConfig,
    data: &PreparedData,
    tag: u64,
) -> Result<(MetricsReport, Vec<AnomalyModel>)> {
    let models: Vec<&GanModel> = if sim.policy.algo() == Algo::Standalone {
        sim.fed.locals.iter().collect()
    } else {
        vec![&sim.fed.global]
    };
    let unit = vec![1.0; data.split.normalizer.mean.len()];
    let mut reports = Vec::new();
    let mut detectors = Vec::new();
    for (i, gan) in models.into_iter().enumerate() {
        let mut det = AnomalyModel::new(gan.clone());
        det.score_weight = cfg.detector.score_weight;
        det.latent_search_count = cfg.detector.latent_search_count;
        let mut rng = sim.streams.stream("calibrate", tag, 0, i as u64);
        det.threshold = calibrate_threshold(&det, &data.split.validation, &cfg.detector.calibration, &unit, &mut rng)?;
        let mut rng = sim.streams.stream("evaluate", tag, 0, i as u64);
        reports.push(evaluate(&det, &data.split.test, &data.split.test_labels, &mut rng)?);
        detectors.push(det);
    }
    let k = reports.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
    let mut report = reports[0];
    if reports.len() > 1 {
        report.precision = mean(|r| r.precision);
        report.recall = mean(|r| r.recall);
        report.f1 = mean(|r| r.f1);
    }
    Ok((report, detectors))
}

fn slot_header(n_uavs: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "episode",
        "slot",
        "reward",
        "system_cost",
        "coverage_sum",
        "time_cost",
        "round_time",
        "exec_time",
        "aggregation_latency",
        "disc_loss",
        "gen_loss",
        "penalty_sum",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for kind in ["e_propulsion", "e_compute", "e_transmission"] {
        h.extend((0..n_uavs).map(|n| format!("{kind}_{n}")));
    }
    h.push("selection_mask".into());
    h.push("associated".into());
    h
}

fn slot_row(s: &SlotMetrics) -> Vec<String> {
    let mut r = vec![s.episode.to_string(), s.slot.to_string()];
    r.extend([s.reward, s.system_cost].iter().map(f64::to_string));
    r.push(s.coverage_sum.to_string());
    r.extend(
        [s.time_cost, s.round_time, s.exec_time, s.aggregation_latency, s.disc_loss, s.gen_loss, s.penalty_sum]
            .iter()
            .map(f64::to_string),
    );
    for v in [&s.propulsion_energy, &s.compute_energy, &s.transmission_energy] {
        r.extend(v.iter().map(f64::to_string));
    }
    r.push(s.selection_mask.to_string());
    r.push(s.associated.to_string());
    r
}

fn episode_header(n_uavs: usize) -> Vec<String> {
    let mut h: Vec<String> =
        ["episode", "mean_reward", "discounted_return", "exec_time_avg", "exec_time_max"].iter().map(|s| s.to_string()).collect();
    h.extend((0..n_uavs).map(|n| format!("energy_{n}")));
    h.extend(["precision", "recall", "f1"].iter().map(|s| s.to_string()));
    h
}

fn episode_row(e: &EpisodeMetrics) -> Vec<String> {
    let mut r = vec![e.episode.to_string()];
    r.extend([e.mean_reward, e.discounted_return, e.exec_time_avg, e.exec_time_max].iter().map(f64::to_string));
    r.extend(e.total_energy.iter().map(f64::to_string));
    match &e.detection {
        Some(d) => r.extend([d.precision, d.recall, d.f1].iter().map(f64::to_string)),
        None => r.extend(std::iter::repeat_n(String::new(), 3)),
    }
    r
}

/// Machine-readable digest of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub episodes: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean over episodes of the summed per-slot execution time.
    pub exec_time_avg: f64,
    /// Mean over episodes of the summed per-slot round time.
    pub exec_time_max: f64,
    /// Mean over episodes of each UAV's total energy, J.
    pub uav_mean_energy: Vec<f64>,
    pub mean_energy: f64,
    pub reward_curve: Vec<f64>,
    pub last20_mean_reward: f64,
}

pub fn emit_report(episodes: &[EpisodeMetrics], detection: &MetricsReport) -> Result<Summary> {
    let first = episodes.first().ok_or_else(|| Error::Empty("episode metrics".into()))?;
    let k = episodes.len() as f64;
    let n_uavs = first.total_energy.len();
    let uav_mean_energy: Vec<f64> = (0..n_uavs).map(|n| episodes.iter().map(|e| e.total_energy[n]).sum::<f64>() / k).collect();
    let mean_energy = uav_mean_energy.iter().sum::<f64>() / n_uavs.max(1) as f64;
    let reward_curve: Vec<f64> = episodes.iter().map(|e| e.mean_reward).collect();
    let tail = &reward_curve[reward_curve.len().saturating_sub(20)..];
    Ok(Summary {
        episodes: episodes.len(),
        precision: detection.precision,
        recall: detection.recall,
        f1: detection.f1,
        exec_time_avg: episodes.iter().map(|e| e.exec_time_avg).sum::<f64>() / k,
        exec_time_max: episodes.iter().map(|e| e.exec_time_max).sum::<f64>() / k,
        uav_mean_energy,
        mean_energy,
        last20_mean_reward: tail.iter().sum::<f64>() / tail.len() as f64,
        reward_curve,
    })
}

/// Everything a run produced, also written under `cfg.run.output_dir`.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub episodes: Vec<EpisodeMetrics>,
    pub detection: MetricsReport,
    pub summary: Option<Summary>,
    pub skipped_lines: usize,
}

/// Runs one experiment: `metrics.csv` (one row per slot), `episodes.csv`,
/// `summary.json` (when at least one episode ran), the resolved config and,
/// optionally, checkpoints.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let seed = cfg.resolved_seed()?;
    let streams = Streams::new(seed);
    let data = prepare_data(cfg, &streams)?;
    let mut sim = build_simulation(cfg, cfg.run.algo, streams, &data)?;

    let out = &cfg.run.output_dir;
    fs::create_dir_all(out)?;
    let mut resolved = cfg.clone();
    resolved.run.seed = Some(seed);
    fs::write(out.join("config.resolved.json"), serde_json::to_string_pretty(&resolved)?)?;

    let n = cfg.world.n_uavs;
    let mut slots_csv = csv::Writer::from_writer(File::create(out.join("metrics.csv"))?);
    slots_csv.write_record(slot_header(n))?;
    let mut episodes_csv = csv::Writer::from_writer(File::create(out.join("episodes.csv"))?);
    episodes_csv.write_record(episode_header(n))?;

    let mut episodes = Vec::with_capacity(cfg.run.episodes);
    for ep in 0..cfg.run.episodes {
        let mut metrics = run_episode(&mut sim, ep as u64)?;
        if cfg.run.eval_every > 0 && (ep + 1) % cfg.run.eval_every == 0 {
            metrics.detection = Some(evaluate_detection(&sim, cfg, &data, ep as u64)?.0);
        }
        for s in &metrics.slots {
            slots_csv.write_record(slot_row(s))?;
        }
        slots_csv.flush()?;
        episodes.push(metrics);
    }

    let (detection, detectors) = evaluate_detection(&sim, cfg, &data, u64::MAX)?;
    if let Some(last) = episodes.last_mut() {
        last.detection = Some(detection);
    }
    for e in &episodes {
        episodes_csv.write_record(episode_row(e))?;
    }
    episodes_csv.flush()?;

    let summary = if episodes.is_empty() { None } else { Some(emit_report(&episodes, &detection)?) };
    if let Some(s) = &summary {
        fs::write(out.join("summary.json"), serde_json::to_string_pretty(s)?)?;
    }
    if cfg.run.checkpoints {
        save_checkpoints(&sim, &detectors, &out.join("checkpoints"))?;
    }
    Ok(RunOutcome { seed, episodes, detection, summary, skipped_lines: data.skipped_lines })
}

fn save_checkpoints(sim: &Simulation, detectors: &[AnomalyModel], dir: &Path) -> Result<()> {
    for (i, d) in detectors.iter().enumerate() {
        let name = if detectors.len() == 1 { "detector".to_string() } else { format!("detector_{i}") };
        d.save(dir.join(name))?;
    }
    if let Policy::Ca2c(agent) = &sim.policy {
        agent.save(dir.join("agent"))?;
    }
    Ok(())
}
