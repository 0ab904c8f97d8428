use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

use super::SensorRecord;
use crate::{Error, Result};

pub const BUFFER_CAPACITY: usize = 4096;

/// Maps motes onto `n_devices` devices: a seeded shuffle of the distinct mote
/// ids, then round-robin. With more devices than motes, motes are reused
/// cyclically. Every device stream is sorted by time.
pub fn assign_motes_to_devices<R: Rng + ?Sized>(
    records: &[SensorRecord],
    n_devices: usize,
    rng: &mut R,
) -> Result<Vec<Vec<SensorRecord>>> {
    if n_devices == 0 {
        return Err(Error::InvalidArgument("n_devices must be positive".into()));
    }
    let mut motes: Vec<usize> = records.iter().map(|r| r.mote_id).collect();
    motes.sort_unstable();
    motes.dedup();
    if motes.is_empty() {
        return Err(Error::Empty("no records to assign".into()));
    }
    motes.shuffle(rng);

    let mut devices_of_mote = std::collections::HashMap::<usize, Vec<usize>>::new();
    for slot in 0..motes.len().max(n_devices) {
        devices_of_mote.entry(motes[slot % motes.len()]).or_default().push(slot % n_devices);
    }
    let mut streams = vec![Vec::new(); n_devices];
    for r in records {
        for &d in &devices_of_mote[&r.mote_id] {
            streams[d].push(r.clone());
        }
    }
    for s in &mut streams {
        s.sort_by(|a: &SensorRecord, b: &SensorRecord| a.timestamp.total_cmp(&b.timestamp));
    }
    Ok(streams)
}

/// Per-device feature streams with read cursors that wrap around.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceStreams {
    streams: Vec<Vec<Vec<f64>>>,
    cursors: Vec<usize>,
}

impl DeviceStreams {
    pub fn new(streams: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if streams.iter().any(|s| s.is_empty()) {
            return Err(Error::Empty("device stream".into()));
        }
        let cursors = vec![0; streams.len()];
        Ok(Self { streams, cursors })
    }

    pub fn from_records(per_device: &[Vec<SensorRecord>]) -> Result<Self> {
        Self::new(per_device.iter().map(|s| s.iter().map(|r| r.features.to_vec()).collect()).collect())
    }

    pub fn n_devices(&self) -> usize {
        self.streams.len()
    }

    /// Next unread sample of `device`, restarting from the beginning once exhausted.
    pub fn next_sample(&mut self, device: usize) -> &[f64] {
        let i = self.cursors[device];
        self.cursors[device] = (i + 1) % self.streams[device].len();
        &self.streams[device][i]
    }
}

/// Ring buffer keeping the newest `capacity` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    capacity: usize,
    data: VecDeque<Vec<f64>>,
}

impl SampleBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, data: VecDeque::with_capacity(capacity.min(BUFFER_CAPACITY)) }
    }

    pub fn push(&mut self, x: Vec<f64>) {
        if self.capacity == 0 {
            return;
        }
        if self.data.len() == self.capacity {
            self.data.pop_front();
        }
        self.data.push_back(x);
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The newest `n` samples (fewer if not available), oldest first.
    pub fn newest(&self, n: usize) -> Vec<Vec<f64>> {
        let skip = self.data.len().saturating_sub(n);
        self.data.iter().skip(skip).cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.data.iter()
    }
}

/// Appends, for every slot and UAV, the next sample of each covered device.
/// `coverage[t][n]` lists the devices UAV `n` covers at slot `t`.
pub fn build_uav_buffer(
    streams: &mut DeviceStreams,
    coverage: &[Vec<Vec<usize>>],
    buffers: &mut [SampleBuffer],
) -> Result<()> {
    for slot in coverage {
        if slot.len() != buffers.len() {
            return Err(Error::Shape(format!("coverage for {} uavs, {} buffers", slot.len(), buffers.len())));
        }
        for (devices, buf) in slot.iter().zip(buffers.iter_mut()) {
            for &d in devices {
                if d >= streams.n_devices() {
                    return Err(Error::InvalidArgument(format!("device {d} out of range")));
                }
                buf.push(streams.next_sample(d).to_vec());
            }
        }
    }
    Ok(())
}
