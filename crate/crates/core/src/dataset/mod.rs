//! Sensor trace ingestion, splitting, anomaly injection and per-UAV buffers.

mod buffer;
mod split;
mod synth;
mod trace;

pub use buffer::{assign_motes_to_devices, build_uav_buffer, DeviceStreams, SampleBuffer, BUFFER_CAPACITY};
pub use split::{inject_anomalies, split, Normalizer, SplitDatasets, SplitRatios};
pub use synth::{synthesize, FEATURE_CENTERS};
pub use trace::{
    format_record, load_records, parse_trace, read_cache, read_trace, write_cache, ParseOutcome, SensorRecord,
    N_FEATURES,
};
