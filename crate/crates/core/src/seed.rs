//! Seed derivation. Every stream of randomness is derived from one of two
//! base seeds plus a tuple of tags.

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}
