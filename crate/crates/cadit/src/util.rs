//! Small shared helpers.

/// Derive a sub-seed for an independent RNG stream, FNV-1a over the tag
/// mixed with the base seed.
pub(crate) fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325 ^ seed.wrapping_mul(0x9e3779b97f4a7c15);
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
