//! Slotted simulator for a HAPS/UAV/IoT network in which UAVs sense ground
//! devices, train differentially private WGAN-GP anomaly detectors locally, and
//! a HAPS aggregates a scheduler-selected subset of them each slot.
//!
//! The scheduler is a compound-action actor-critic: a critic-driven argmax over
//! device association and UAV selection, combined with a deterministic actor for
//! UAV trajectories.
//!
//! Module map:
//! - [`env`]: geometry, sensing, LoS channel rates and UAV energy accounting.
//! - [`nn`]: dense networks, reverse-mode gradients, gradient-penalty gradients, Adam.
//! - [`detector`]: WGAN-GP losses, DP gradient mechanism, local training, scoring.
//! - [`federation`]: latency model, weighted aggregation, per-slot rounds.
//! - [`scheduler`]: MDP encoding, cost/reward, CA2C and baseline policies.
//! - [`dataset`]: sensor trace ingestion, splitting, anomaly injection, synthesis.
//! - [`config`] / [`experiment`]: run configuration, episode orchestration, reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod detector;
pub mod env;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod nn;
pub mod rng;
pub mod scheduler;

pub use error::{Error, Result};
