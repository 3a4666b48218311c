//! Deterministic RNG stream derivation and small hashing helpers.
//!
//! Every random decision in the crate flows from a root seed through
//! [`derive_seed`], so independent work items (bank entries, epochs, clips)
//! get independent streams whose values do not depend on scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; decorrelates nearby seed values.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a root seed and a tag path.
///
/// The same `(root, tags)` always yields the same child, and distinct tag
/// paths yield uncorrelated children.
pub fn derive_seed(root: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(root);
    for &t in tags {
        s = splitmix64(s ^ splitmix64(t));
    }
    s
}

/// A ChaCha8 RNG seeded from a derived stream.
pub fn derived_rng(root: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, tags))
}

/// Stable tag for string-labelled streams.
pub fn tag(label: &str) -> u64 {
    fnv1a64(label.as_bytes())
}

/// FNV-1a 64-bit hash. Used for config/manifest fingerprints, where a
/// stable, dependency-free hash matters more than collision resistance.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hex-formatted FNV-1a fingerprint.
pub fn fingerprint(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a64(bytes))
}

/// Standard-normal sample via Box-Muller. `rand_distr` would also do, but
/// this keeps the exact bit pattern of weight init under our control.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        if u1 > f64::MIN_POSITIVE {
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}
