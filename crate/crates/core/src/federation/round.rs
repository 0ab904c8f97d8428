use serde::{Deserialize, Serialize};

use super::{
    aggregate, aggregation_latency, distribution_latency, global_losses, local_update_latency, upload_latency,
    EvalBatch, LatencyBreakdown, UavComputeConfig, UavLatency,
};
use crate::dataset::SampleBuffer;
use crate::detector::{local_update, DpConfig, GanModel, GanOptim, TrainConfig};
use crate::env::{computational_energy, downlink_rate, transmission_energy, uplink_rate, ChannelConfig, EnergyConfig, WorldState};
use crate::nn::AdamConfig;
use crate::rng::Streams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoundConfig {
    pub compute: UavComputeConfig,
    pub train: TrainConfig,
    pub dp: DpConfig,
    pub channel: ChannelConfig,
    pub energy: EnergyConfig,
    /// False runs every participant on its own model with no exchange.
    pub federated: bool,
    /// Train participants on scoped threads; results are merged by UAV id.
    pub parallel: bool,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self {
            compute: UavComputeConfig::default(),
            train: TrainConfig::default(),
            dp: DpConfig::default(),
            channel: ChannelConfig::default(),
            energy: EnergyConfig::default(),
            federated: true,
            parallel: false,
        }
    }
}

/// Models, optimizer moments and sample buffers of every UAV.
#[derive(Debug, Clone, PartialEq)]
pub struct FedState {
    pub global: GanModel,
    pub locals: Vec<GanModel>,
    pub optims: Vec<GanOptim>,
    pub buffers: Vec<SampleBuffer>,
    /// Fixed held-out batch per UAV for loss reporting.
    pub eval: Vec<EvalBatch>,
    pub aggregate_calls: usize,
}

impl FedState {
    pub fn new(global: GanModel, eval: Vec<EvalBatch>, buffer_capacity: usize, adam: AdamConfig) -> Self {
        let n = eval.len();
        Self {
            locals: vec![global.clone(); n],
            optims: vec![GanOptim::new(&global, adam); n],
            buffers: vec![SampleBuffer::new(buffer_capacity); n],
            global,
            eval,
            aggregate_calls: 0,
        }
    }

    pub fn n_uavs(&self) -> usize {
        self.locals.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundPlan {
    pub slot: usize,
    pub selection: Vec<bool>,
    pub local_dataset_sizes: Vec<usize>,
}

impl RoundPlan {
    /// Training-set size of each UAV is its buffer fill capped at `max_train_samples`.
    pub fn from_buffers(slot: usize, selection: Vec<bool>, buffers: &[SampleBuffer], cfg: &UavComputeConfig) -> Self {
        let local_dataset_sizes = buffers.iter().map(|b| b.len().min(cfg.max_train_samples)).collect();
        Self { slot, selection, local_dataset_sizes }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoundOutcome {
    pub latency: LatencyBreakdown,
    pub compute_energy: Vec<f64>,
    pub transmission_energy: Vec<f64>,
    pub disc_loss: f64,
    pub gen_loss: f64,
    /// Participants that had enough samples to run a local update.
    pub trained: Vec<bool>,
    pub aggregated: bool,
}

type Trained = (usize, GanModel, GanOptim);

fn train_one(
    uav: usize,
    start: &GanModel,
    mut optim: GanOptim,
    data: &[Vec<f64>],
    cfg: &RoundConfig,
    streams: &Streams,
    episode: u64,
    slot: u64,
) -> Result<Trained> {
    let mut rng = streams.stream("local_update", episode, slot, uav as u64);
    let mut noise = streams.stream("dp_noise", episode, slot, uav as u64);
    let (model, _) = local_update(start, data, &cfg.train, &cfg.dp, &mut optim, &mut rng, &mut noise)?;
    if !(model.theta.is_finite() && model.w.is_finite()) {
        return Err(Error::NonFinite(format!("local model of uav {uav}")));
    }
    Ok((uav, model, optim))
}

/// One slot of the protocol: participants train on their newest samples, the
/// trainable ones are averaged by dataset size, and the result is broadcast to
/// every UAV. In non-federated mode participants only train locally.
pub fn run_round(
    state: &mut FedState,
    world: &WorldState,
    plan: &RoundPlan,
    cfg: &RoundConfig,
    streams: &Streams,
    episode: u64,
) -> Result<RoundOutcome> {
    let n = state.n_uavs();
    if plan.selection.len() != n || plan.local_dataset_sizes.len() != n || world.n_uavs() != n {
        return Err(Error::Shape(format!("round plan and world must describe {n} uavs")));
    }
    let participants: Vec<usize> = (0..n).filter(|&i| plan.selection[i]).collect();
    if participants.is_empty() {
        return Err(Error::Empty("selection".into()));
    }
    let slot = plan.slot as u64;
    let trainable: Vec<usize> =
        participants.iter().copied().filter(|&i| plan.local_dataset_sizes[i] >= cfg.train.batch_size).collect();
    let data: Vec<Vec<Vec<f64>>> = trainable.iter().map(|&i| state.buffers[i].newest(plan.local_dataset_sizes[i])).collect();

    let results: Vec<Result<Trained>> = if cfg.parallel && trainable.len() > 1 {
        std::thread::scope(|s| {
            let handles: Vec<_> = trainable
                .iter()
                .zip(&data)
                .map(|(&i, d)| {
                    let (start, optim) = (&state.locals[i], state.optims[i].clone());
                    s.spawn(move || train_one(i, start, optim, d, cfg, streams, episode, slot))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
        })
    } else {
        trainable
            .iter()
            .zip(&data)
            .map(|(&i, d)| train_one(i, &state.locals[i], state.optims[i].clone(), d, cfg, streams, episode, slot))
            .collect()
    };
    for r in results {
        let (i, model, optim) = r?;
        state.locals[i] = model;
        state.optims[i] = optim;
    }

    let mut per_uav = Vec::with_capacity(participants.len());
    let mut compute_energy = vec![0.0; n];
    let mut tx_energy = vec![0.0; n];
    let agg = if cfg.federated { aggregation_latency(participants.len(), &cfg.compute) } else { 0.0 };
    for &i in &participants {
        let update = local_update_latency(plan.local_dataset_sizes[i], &cfg.compute);
        let (upload, distribution) = if cfg.federated {
            let uav = &world.uavs[i];
            (
                upload_latency(uplink_rate(uav, &cfg.channel), &cfg.compute)?,
                distribution_latency(downlink_rate(uav, &cfg.channel), &cfg.compute)?,
            )
        } else {
            (0.0, 0.0)
        };
        compute_energy[i] = computational_energy(true, update, &cfg.energy);
        tx_energy[i] = transmission_energy(cfg.federated, upload, &cfg.channel);
        per_uav.push(UavLatency { uav: i, update, upload, aggregation: agg, distribution });
    }
    let latency = LatencyBreakdown::from_parts(per_uav)?;

    let mut aggregated = false;
    let (disc_loss, gen_loss) = if cfg.federated {
        if !trainable.is_empty() {
            let pairs: Vec<(&GanModel, usize)> =
                trainable.iter().map(|&i| (&state.locals[i], plan.local_dataset_sizes[i])).collect();
            state.global = aggregate(&pairs)?;
            state.aggregate_calls += 1;
            aggregated = true;
        }
        for local in &mut state.locals {
            local.clone_from(&state.global);
        }
        let models: Vec<&GanModel> = participants.iter().map(|_| &state.global).collect();
        let batches: Vec<&EvalBatch> = participants.iter().map(|&i| &state.eval[i]).collect();
        global_losses(&models, &batches, cfg.train.gp_coeff)?
    } else {
        let models: Vec<&GanModel> = participants.iter().map(|&i| &state.locals[i]).collect();
        let batches: Vec<&EvalBatch> = participants.iter().map(|&i| &state.eval[i]).collect();
        global_losses(&models, &batches, cfg.train.gp_coeff)?
    };
    if !(disc_loss.is_finite() && gen_loss.is_finite()) {
        return Err(Error::NonFinite(format!("global losses at slot {}", plan.slot)));
    }
    let mut trained = vec![false; n];
    for &i in &trainable {
        trained[i] = true;
    }
    Ok(RoundOutcome { latency, compute_energy, transmission_energy: tx_energy, disc_loss, gen_loss, trained, aggregated })
}
