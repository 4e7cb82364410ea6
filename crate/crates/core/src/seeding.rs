//! Deterministic generator derivation.
//!
//! Every random draw in the pipeline comes from a ChaCha8 generator keyed by
//! the run seed plus a tuple of indices (purpose, epoch, sample, ...), so
//! results do not depend on processing order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const PURPOSE_AUGMENT: u64 = 0x6175_6700;
pub(crate) const PURPOSE_SHUFFLE: u64 = 0x7368_7566;
pub(crate) const PURPOSE_SYNTH: u64 = 0x7379_6e74;
pub(crate) const PURPOSE_INIT: u64 = 0x696e_6974;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn derive_rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_stable_and_separates_streams() {
        let a: u64 = derive_rng(7, &[1, 2]).random();
        let b: u64 = derive_rng(7, &[1, 2]).random();
        let c: u64 = derive_rng(7, &[2, 1]).random();
        let d: u64 = derive_rng(8, &[1, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
