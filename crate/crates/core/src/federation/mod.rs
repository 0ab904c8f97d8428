//! Asynchronous federated training: latency accounting, weighted aggregation
//! and one slot of the protocol.

mod aggregate;
mod latency;
mod round;

pub use aggregate::{aggregate, global_losses, EvalBatch};
pub use latency::{
    aggregation_latency, distribution_latency, local_update_latency, round_time, time_cost, upload_latency,
    LatencyBreakdown, UavComputeConfig, UavLatency,
};
pub use round::{run_round, FedState, RoundConfig, RoundOutcome, RoundPlan};
