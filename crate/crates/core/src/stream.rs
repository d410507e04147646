//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, label, index, draw number)`, so a
//! sample's randomness does not depend on which worker produced it or in what
//! order samples were visited.

use rand::rand_core::impls;
use rand::RngCore;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a, used to fold a stream label into the key.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Identifies a family of independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64, label: &str) -> Self {
        Self(mix64(mix64(seed) ^ fnv1a(label.as_bytes())))
    }

    /// Derives a child key, e.g. one per swept parameter value.
    pub fn substream(self, index: u64) -> Self {
        Self(mix64(self.0 ^ mix64(index.wrapping_add(GOLDEN))))
    }

    /// The stream for sample `index`.
    pub fn rng(self, index: u64) -> CounterRng {
        CounterRng {
            state: mix64(self.0.wrapping_add(mix64(index ^ 0x5851_f42d_4c95_7f2d))),
        }
    }
}

/// SplitMix64 generator whose starting state is derived from a counter.
#[derive(Debug, Clone)]
pub struct CounterRng {
    state: u64,
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}
