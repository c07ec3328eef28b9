//! Deterministic seed derivation for independent RNG streams.

/// SplitMix64 finalizer; maps a seed to a well-mixed 64-bit value.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a master seed and a stream index.
///
/// Distinct indices give statistically independent streams; the mapping is
/// pure, so workers can derive their own seeds in any order.
pub fn derive(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream.wrapping_add(1)))
}
