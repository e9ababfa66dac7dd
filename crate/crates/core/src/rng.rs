//! Seeded, stream-splittable randomness.
//!
//! A [`RandomSource`] wraps ChaCha20 (a counter-based generator). Round `r` of an
//! experiment seeded with `s` uses key `s` and stream `r`, so every round draws
//! from its own independent sequence regardless of scheduling. Sub-experiments
//! derive fresh keys with [`derive_seed`].

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a list of tags into a new seed.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// Deterministic random source: identical seed and call sequence give identical output.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Source keyed by `seed` positioned at the start of `stream`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Independent child stream (e.g. one per unitary round).
    pub fn child(&self, stream: u64) -> Self {
        Self::with_stream(derive_seed(self.seed, &[self.stream]), stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Words consumed so far within the stream.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}
