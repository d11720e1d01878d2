//! Reproducible random streams.
//!
//! Every chain step draws from its own ChaCha8 substream. The 256-bit key is
//! derived from `(seed, chain)` by four rounds of SplitMix64:
//!
//! ```text
//! x_0   = seed ^ (chain * 0x9E3779B97F4A7C15)
//! key_i = splitmix64(x_i), x_{i+1} = x_i + 0x9E3779B97F4A7C15   (i = 0..3, little endian)
//! ```
//!
//! and the ChaCha stream id is the step index. Ports that reproduce this
//! layout see the same uniform words, though not necessarily identical floats.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Factory for the `(seed, chain, step)` substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    seed: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn key(&self, chain: u64) -> [u8; 32] {
        let mut x = self.seed ^ chain.wrapping_mul(GOLDEN);
        let mut key = [0u8; 32];
        for word in key.chunks_exact_mut(8) {
            word.copy_from_slice(&splitmix64(x).to_le_bytes());
            x = x.wrapping_add(GOLDEN);
        }
        key
    }

    pub fn stream(&self, chain: u64, step: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key(chain));
        rng.set_stream(step);
        rng
    }
}
