//! Local dense kernels shared by the driver and the executors.
//!
//! Everything here is a pure function of immutable inputs.

mod eig;
mod lstsq;
mod matrix;
mod nnls;
mod qr;
mod svd;

pub use eig::{symmetric_eigen, symmetric_eigs, EigsOptions, EigsResult, RestartLog};
pub use lstsq::least_squares;
pub(crate) use lstsq::{apply_pseudo_inverse, rank_cutoff};
pub use matrix::{axpy, dot, norm2, DenseMatrix};
pub use nnls::nnls;
pub use qr::{qr_r, thin_qr};
pub use svd::{thin_svd, SpectralFactors};
pub(crate) use svd::normalize_signs;

#[cfg(test)]
pub(crate) mod testutil {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::DenseMatrix;

    /// Uniform entries in `[-1, 1)`.
    pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    /// Uniform entries in `[0, 1)`.
    pub fn random_nonneg(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
    }
}
