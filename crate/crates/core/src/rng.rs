//! Deterministic random streams.
//!
//! All randomness is derived from one user seed. Independent consumers get
//! their own ChaCha stream id, so adding a consumer never perturbs another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::linalg::DenseMatrix;

/// Stream ids for the consumers of the run seed.
pub mod stream {
    pub const SKETCH: u64 = 1;
    pub const COLUMN_SAMPLING: u64 = 2;
    pub const EIGS_START: u64 = 3;
    pub const DELAY_INJECTION: u64 = 4;
}

pub fn generator(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer, used to derive sub-seeds from structured keys.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in `[0, 1)` keyed by `(seed, a, b)`; stateless.
pub fn keyed_uniform(seed: u64, a: u64, b: u64) -> f64 {
    let h = mix(mix(seed ^ mix(a)) ^ b);
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal matrix filled in row-major order with the Box–Muller
/// transform over consecutive uniform pairs of the given stream.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64, stream: u64) -> DenseMatrix {
    let mut rng = generator(seed, stream);
    let total = rows * cols;
    let mut data = Vec::with_capacity(total + 1);
    while data.len() < total {
        // u1 in (0, 1] keeps the log finite
        let u1 = 1.0 - rng.random::<f64>();
        let u2 = rng.random::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        data.push(radius * angle.cos());
        data.push(radius * angle.sin());
    }
    data.truncate(total);
    DenseMatrix::new(rows, cols, data).expect("length matches")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_is_reproducible_and_roughly_standard() {
        let a = gaussian_matrix(200, 50, 9, stream::SKETCH);
        let b = gaussian_matrix(200, 50, 9, stream::SKETCH);
        assert_eq!(a, b);
        let n = (200 * 50) as f64;
        let mean = a.as_slice().iter().sum::<f64>() / n;
        let var = a.as_slice().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05);
        assert!((var - 1.0).abs() < 0.05);
        assert_ne!(a, gaussian_matrix(200, 50, 9, stream::COLUMN_SAMPLING));
    }

    #[test]
    fn keyed_uniform_in_range() {
        for i in 0..1000 {
            let u = keyed_uniform(1, i, 7);
            assert!((0.0..1.0).contains(&u));
        }
        assert_eq!(keyed_uniform(3, 4, 5), keyed_uniform(3, 4, 5));
    }
}
