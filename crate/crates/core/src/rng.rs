//! Reproducible random streams.
//!
//! Every stochastic task draws from its own ChaCha8 stream. A stream is
//! addressed by `(master seed, domain, index)`: the master seed and domain are
//! mixed into a 256-bit key and the index selects one of the 2^64 ChaCha
//! streams under that key. Work can therefore be spread over any number of
//! threads without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Identifier written into run metadata so output can be tied to the generator.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9/splitmix64-keyed-streams";

/// Named domains for the stochastic stages of a run.
pub mod domain {
    pub const SIMULATE: u64 = 1;
    pub const CORRUPT: u64 = 2;
    pub const INITIAL: u64 = 3;
    pub const ABC_PILOT: u64 = 10;
    /// Generation `g` uses `ABC_GENERATION + g`.
    pub const ABC_GENERATION: u64 = 100;
    pub const HYBRID_INIT: u64 = 20;
    pub const TUNER: u64 = 21;
    /// Chain `c` uses stream `c` in this domain.
    pub const CHAIN: u64 = 22;
    pub const PREDICTIVE: u64 = 30;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    master: u64,
}

impl Streams {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, domain: u64, index: u64) -> StreamRng {
        let mut state = self.master ^ domain.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }

    /// A child family of streams, for nesting one seeded stage inside another.
    pub fn child(&self, domain: u64, index: u64) -> Streams {
        let mut state =
            self.master ^ domain.rotate_left(17) ^ index.wrapping_mul(0xA076_1D64_78BD_642F);
        Streams::new(splitmix64(&mut state))
    }
}
