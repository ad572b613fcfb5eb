//! Counter-based random streams.
//!
//! Every consumer of randomness (a chain replica, a reference draw, a
//! bootstrap replicate) owns a ChaCha8 generator whose key comes from the
//! master seed and whose 64-bit stream id is a hash of the master seed and
//! the consumer's index tuple. Streams never share state, so any schedule
//! of workers reproduces the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// SplitMix64-style hash of a word sequence.
pub fn hash64(words: &[u64]) -> u64 {
    let mut h = mix(GOLDEN ^ words.len() as u64);
    for &w in words {
        h = mix(h.wrapping_add(GOLDEN) ^ w);
    }
    h
}

/// Generator for the stream identified by `ids` under `master_seed`.
pub fn stream(master_seed: u64, ids: &[u64]) -> StreamRng {
    let mut key = [0u8; 32];
    let mut state = master_seed;
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN);
        chunk.copy_from_slice(&mix(state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    let mut words = [0u64; 9];
    let n = ids.len().min(8);
    words[0] = master_seed;
    words[1..=n].copy_from_slice(&ids[..n]);
    rng.set_stream(hash64(&words[..=n]));
    rng
}

/// Domain tags keep streams for different purposes apart even when their
/// index tuples coincide.
pub mod domain {
    pub const START: u64 = 1;
    pub const CHAIN: u64 = 2;
    pub const REFERENCE: u64 = 3;
    pub const RESAMPLE: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const DIFFUSION: u64 = 6;
    pub const CALIBRATION: u64 = 7;
    pub const SWEEP: u64 = 8;
    pub const NOISE: u64 = 9;
}
