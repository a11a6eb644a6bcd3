//! Shared inputs for the benchmarks.

use fwdsc_core::SimilarityMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense symmetric matrix with uniform off-diagonal entries in `[0, 1)`.
pub fn random_similarity(n: usize, seed: u64) -> SimilarityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = rng.random();
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    SimilarityMatrix::from_row_major(n, data).expect("valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_similarity_is_valid_and_seeded() {
        let a = random_similarity(20, 3);
        assert_eq!(a, random_similarity(20, 3));
        assert_ne!(a, random_similarity(20, 4));
        assert_eq!(a.get(4, 4), 0.0);
    }
}
