//! Named random streams.
//!
//! Every consumer draws from its own ChaCha8 stream keyed by
//! `(seed, purpose, episode, slot, uav)`, so adding a consumer never shifts the
//! numbers seen by another one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Root of all random streams for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn key(&self, purpose: &str, episode: u64, slot: u64, uav: u64) -> u64 {
        let mut h = splitmix64(self.seed);
        for part in [fnv1a(purpose), episode, slot, uav] {
            h = splitmix64(h ^ part);
        }
        h
    }

    pub fn stream(&self, purpose: &str, episode: u64, slot: u64, uav: u64) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.key(purpose, episode, slot, uav))
    }

    /// Stream that is not tied to an episode/slot/uav position.
    pub fn global(&self, purpose: &str) -> StreamRng {
        self.stream(purpose, u64::MAX, u64::MAX, u64::MAX)
    }
}
