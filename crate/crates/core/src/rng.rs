//! Seedable, splittable random streams.
//!
//! Every random draw in the simulator comes from a [`SimRng`]. Independent
//! work items (one dataset sample, one sweep realization) each get their own
//! substream whose seed is a pure function of the master seed, a domain tag
//! and the item index:
//!
//! ```text
//! seed = splitmix64(splitmix64(master ^ splitmix64(domain)) ^ index)
//! ```
//!
//! The derived seed keys a ChaCha12 generator. Because the seed does not
//! depend on which thread handles the item, parallel generation produces
//! the same bytes as a sequential run.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Domain tags used by the harness. Kept stable so datasets stay reproducible.
pub mod domain {
    pub const TRAIN: u64 = 0x5452_4149_4e00_0001;
    pub const TEST: u64 = 0x5445_5354_0000_0002;
    pub const SWEEP_ELEMENTS: u64 = 0x5357_454c_0000_0003;
    pub const SWEEP_DISTANCE: u64 = 0x5357_4453_0000_0004;
    pub const BENCHMARK: u64 = 0x4245_4e43_0000_0005;
    pub const TRAINING: u64 = 0x4f50_5449_0000_0006;
    pub const SELECTION: u64 = 0x5345_4c45_0000_0007;
}

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn stream_seed(master: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(domain)) ^ index)
}

#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha12Rng,
}

impl SimRng {
    pub fn from_seed(seed: u64) -> Self {
        SimRng {
            seed,
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn substream(master: u64, domain: u64, index: u64) -> Self {
        Self::from_seed(stream_seed(master, domain, index))
    }

    /// Seed that reproduces this stream from its start.
    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl RngCore for SimRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
