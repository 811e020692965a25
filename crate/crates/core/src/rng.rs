//! Seed derivation for named random substreams.
//!
//! Every stochastic step of a run (data generation, splits, warm start,
//! model initialization, acquisition) draws from its own substream so that
//! changing one step never shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The concrete generator behind every substream.
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub label: String,
    pub repeat: u64,
}

impl RngStream {
    pub fn new(seed: u64, label: impl Into<String>, repeat: u64) -> Self {
        Self {
            seed,
            label: label.into(),
            repeat,
        }
    }

    /// FNV-1a over (seed, label, repeat) followed by a SplitMix64 finalizer.
    pub fn derived_seed(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= u64::from(b);
                h = h.wrapping_mul(PRIME);
            }
        };
        eat(&self.seed.to_le_bytes());
        eat(self.label.as_bytes());
        eat(&[0xff]);
        eat(&self.repeat.to_le_bytes());
        splitmix64(h)
    }

    pub fn rng(&self) -> StreamRng {
        StreamRng::seed_from_u64(self.derived_seed())
    }
}

/// Shorthand for `RngStream::new(seed, label, repeat).rng()`.
pub fn substream(seed: u64, label: &str, repeat: u64) -> StreamRng {
    RngStream::new(seed, label, repeat).rng()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
