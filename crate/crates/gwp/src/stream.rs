//! Reproducible RNG streams.
//!
//! Every stochastic routine takes a `(master_seed, stream)` pair instead of a
//! shared RNG so replicate r of experiment e is the same bit stream no matter
//! how many other replicates ran before it or on which thread.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 step; used only to expand seeds, never as the output stream.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent ChaCha12 generator for `(master_seed, stream)`.
///
/// The 256-bit key is expanded from both inputs with splitmix64, so distinct
/// streams under one master seed share no key material and the same pair is
/// bit-reproducible across runs and platforms.
pub fn replicate_rng(master_seed: u64, stream: u64) -> ChaCha12Rng {
    let mut state = master_seed ^ 0x6a09_e667_f3bc_c908;
    let mut key = [0u8; 32];
    // Fold the stream index in after one whitening step so (s, 0) and (0, s)
    // produce unrelated keys.
    let _ = splitmix64(&mut state);
    state ^= stream.wrapping_mul(0x2545_f491_4f6c_dd1d);
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible() {
        let mut a = replicate_rng(42, 7);
        let mut b = replicate_rng(42, 7);
        for _ in 0..64 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn distinct_streams_diverge() {
        let mut draws = std::collections::HashSet::new();
        for seed in 0..8u64 {
            for stream in 0..8u64 {
                let mut rng = replicate_rng(seed, stream);
                assert!(draws.insert(rng.random::<u64>()), "collision at ({seed},{stream})");
            }
        }
    }

    #[test]
    fn seed_and_stream_are_not_interchangeable() {
        let mut a = replicate_rng(3, 0);
        let mut b = replicate_rng(0, 3);
        assert_ne!(a.random::<u64>(), b.random::<u64>());
    }

    /// Frozen first draws; a change here breaks every recorded experiment.
    #[test]
    fn key_schedule_snapshot() {
        let mut rng = replicate_rng(0, 0);
        assert_eq!(rng.random::<u64>(), 0xa5e7_0184_f0d5_709f);
        let mut rng = replicate_rng(20240811, 3);
        assert_eq!(rng.random::<u64>(), 0xbad9_e6f9_ffa5_be18);
    }
}
