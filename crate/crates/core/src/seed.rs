//! Derivation of per-stage sub-seeds from one root seed.
//!
//! Each stochastic stage draws its randomness from a seed derived from the
//! run's root seed and the stage name, so stages can be rerun in isolation
//! without disturbing each other.

/// Derives a stage seed from the root seed and a stage name.
///
/// FNV-1a over the stage name mixed into the root with a splitmix64
/// finalizer. Stable across platforms and releases.
pub fn stage_seed(root: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in stage.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    splitmix64(root ^ h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
