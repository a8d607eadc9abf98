//! Seed derivation for independent deterministic RNG streams.

/// Mix a base seed with a stream label (splitmix64 finalizer) so that
/// per-sensor and per-case streams are decorrelated but reproducible.
pub(crate) fn mix_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
