//! Deterministic seed derivation.
//!
//! Every stochastic component draws its own ChaCha stream from a seed derived
//! by mixing the master seed with a fixed tag, so runs are reproducible
//! regardless of thread scheduling or call order.

/// SplitMix64 finalizer: mixes `master` and `tag` into a well-spread child seed.
pub fn derive(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
