//! Stable seed derivation.
//!
//! Every random stream in a run is derived from one base seed so that runs
//! are reproducible and independent streams can be generated in any order.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `stream` of `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    mix64(base ^ mix64(stream))
}

/// Seed for a named pipeline stage (FNV-1a over the name, then mixed).
pub fn stage_seed(base: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    derive_seed(base, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_values() {
        // Pinned so that datasets stay reproducible across releases.
        assert_eq!(mix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(stage_seed(7, "simulate"), stage_seed(7, "simulate"));
        assert_ne!(stage_seed(7, "simulate"), stage_seed(7, "calibrate"));
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_ne!(derive_seed(7, 1), derive_seed(8, 1));
    }
}
