use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for a labelled sub-stream of `seed`.
///
/// Random draws that must be reproducible in isolation (one patch, one
/// evaluation image) get their own generator keyed by their coordinates, so
/// they can be produced in any order or in parallel.
pub(crate) fn derive(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Seed for the sub-stream of `seed` labelled by `path`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for &p in path {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}

pub(crate) const DOMAIN_PERMUTATION: u64 = 1;
pub(crate) const DOMAIN_PATCH: u64 = 2;
pub(crate) const DOMAIN_EVAL: u64 = 3;
