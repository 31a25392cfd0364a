//! Deterministic seed derivation.
//!
//! Every random stream in the crate is keyed by a root seed and a path of
//! integer coordinates (instance index, vector index, chunk index, sweep
//! cell, ...). Streams never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with a coordinate path into a new 64-bit seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(seed), |acc, &c| splitmix(acc ^ splitmix(c.wrapping_add(GOLDEN))))
}

/// A generator for the stream at `path` under `seed`.
pub fn rng_for(seed: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, path))
}

/// Stream tags used as the first path coordinate, keeping unrelated streams
/// apart even when the remaining coordinates coincide.
pub mod tag {
    pub const HIDDEN_INDEX: u64 = 1;
    pub const VECTOR: u64 = 2;
    pub const TRIAL: u64 = 3;
    pub const CELL: u64 = 4;
    pub const MONTE_CARLO: u64 = 5;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn derivation_is_deterministic_and_path_sensitive() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(8, &[1]));
        assert_ne!(derive_seed(7, &[0]), derive_seed(7, &[]));
        let a: u64 = rng_for(3, &[4]).random();
        let b: u64 = rng_for(3, &[4]).random();
        assert_eq!(a, b);
    }
}
