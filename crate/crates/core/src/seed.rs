//! Deterministic sub-seed derivation.

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for a named sub-stream.
pub fn derive(base: u64, label: &str) -> u64 {
    // FNV-1a over the label, then mixed with the base seed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    mix(base ^ mix(h))
}

/// Derives a seed for the `index`-th item of a named stream.
pub fn derive_indexed(base: u64, label: &str, index: u64) -> u64 {
    mix(derive(base, label) ^ mix(index.wrapping_add(1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_give_distinct_streams() {
        assert_ne!(derive(1, "field"), derive(1, "noise"));
        assert_ne!(derive(1, "field"), derive(2, "field"));
        assert_eq!(derive_indexed(3, "eval", 4), derive_indexed(3, "eval", 4));
        assert_ne!(derive_indexed(3, "eval", 4), derive_indexed(3, "eval", 5));
    }
}
