//! Deterministic, schedule-independent random number streams.
//!
//! Every stochastic routine in the crate takes a `u64` seed and derives
//! independent substreams keyed by (seed, replica, vertex). Results are
//! therefore bit-identical across thread counts and platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step, used to mix stream keys into seed material.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent RNG for the substream `(seed, a, b)`.
///
/// Distinct key tuples yield statistically independent ChaCha streams.
pub fn substream(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut state = seed ^ 0x6A09_E667_F3BC_C908;
    let mut key = [0u8; 32];
    let mixed = [
        splitmix64(&mut state),
        splitmix64(&mut state) ^ a,
        splitmix64(&mut state) ^ b,
        splitmix64(&mut state) ^ a.rotate_left(17) ^ b.rotate_left(43),
    ];
    let mut s2 = mixed[0] ^ mixed[1].wrapping_mul(3) ^ mixed[2].wrapping_mul(5) ^ mixed[3];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s2).to_le_bytes());
    }
    // re-inject the stream key so that (a, b) cannot collapse after mixing
    let mut rng_seed = key;
    rng_seed[0..8].copy_from_slice(&(mixed[1]).to_le_bytes());
    rng_seed[8..16].copy_from_slice(&(mixed[2]).to_le_bytes());
    ChaCha8Rng::from_seed(rng_seed)
}

/// Convenience stream for a single-sequence consumer.
pub fn stream(seed: u64) -> ChaCha8Rng {
    substream(seed, 0, 0)
}
