use rand::Rng;
use rand_distr::StandardNormal;

use super::{SensorRecord, N_FEATURES};

/// Typical levels of the Berkeley trace: degC, %, lux, V.
pub const FEATURE_CENTERS: [f64; N_FEATURES] = [20.0, 40.0, 100.0, 2.7];
const AMPLITUDES: [f64; N_FEATURES] = [3.0, -6.0, 80.0, 0.02];
const NOISE: [f64; N_FEATURES] = [0.4, 0.8, 10.0, 0.003];
const SAMPLES_PER_CYCLE: f64 = 200.0;
const DAY_S: f64 = 86_400.0;
const START: f64 = 1_078_099_200.0;

/// `n_records` readings spread round-robin over `n_motes` motes (ids from 1).
///
/// All four features follow one daily cycle per mote, shifted by a random
/// per-mote phase, plus independent Gaussian noise.
pub fn synthesize<R: Rng + ?Sized>(n_records: usize, n_motes: usize, rng: &mut R) -> Vec<SensorRecord> {
    if n_records == 0 || n_motes == 0 {
        return Vec::new();
    }
    let phases: Vec<f64> = (0..n_motes).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
    let step = DAY_S / SAMPLES_PER_CYCLE;
    (0..n_records)
        .map(|i| {
            let mote = i % n_motes;
            let k = (i / n_motes) as f64;
            let timestamp = START + k * step + mote as f64 * step / n_motes as f64;
            let s = (std::f64::consts::TAU * k / SAMPLES_PER_CYCLE + phases[mote]).sin();
            let mut features = [0.0; N_FEATURES];
            for j in 0..N_FEATURES {
                let z: f64 = rng.sample(StandardNormal);
                features[j] = FEATURE_CENTERS[j] + AMPLITUDES[j] * s + NOISE[j] * z;
            }
            SensorRecord { timestamp, epoch: k as u64, mote_id: mote + 1, features }
        })
        .collect()
}
