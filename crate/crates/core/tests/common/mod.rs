#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsfact::linalg::DenseMatrix;
use tsfact::runtime::{ExecContext, RunConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[-1, 1)`.
pub fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut r = rng(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

/// Entries uniform in `[0, 1)`.
pub fn random_nonneg(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut r = rng(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| r.random::<f64>())
}

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Singular values from an independent dense SVD, descending.
pub fn oracle_singular_values(m: &DenseMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(m).svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Eigenvalues of a symmetric matrix, descending, with matching eigenvectors as columns.
pub fn oracle_eigen(s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = s.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(s.nrows(), order.len(), |r, c| e.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// `m` with column means subtracted.
pub fn centered(m: &DenseMatrix) -> DenseMatrix {
    let rows = m.rows() as f64;
    let means: Vec<f64> = (0..m.cols()).map(|j| m.column(j).iter().sum::<f64>() / rows).collect();
    DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] - means[j])
}

/// Best rank-k Frobenius error from the dense oracle.
pub fn oracle_tail_norm(m: &DenseMatrix, k: usize) -> f64 {
    oracle_singular_values(m).iter().skip(k).map(|s| s * s).sum::<f64>().sqrt()
}

pub fn context(slots: usize) -> ExecContext {
    ExecContext::new(RunConfig {
        executors: 1,
        slots_per_executor: slots,
        ..RunConfig::default()
    })
    .unwrap()
}

pub fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest entry of `|QᵀQ − I|`.
pub fn orthonormality_error(q: &DenseMatrix) -> f64 {
    let g = q.t_matmul(q).unwrap();
    max_abs_diff(&g, &DenseMatrix::identity(q.cols()))
}

/// Columns of `a` and `b` agree up to a per-column sign.
pub fn columns_match_up_to_sign(a: &DenseMatrix, b: &DenseMatrix, tol: f64) -> bool {
    assert_eq!(a.shape(), b.shape());
    (0..a.cols()).all(|j| {
        let (x, y) = (a.column(j), b.column(j));
        let plus = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let minus = x.iter().zip(&y).map(|(p, q)| (p + q).abs()).fold(0.0, f64::max);
        plus.min(minus) <= tol
    })
}

/// An exactly separable nonnegative matrix `W·[I  H']` with its columns
/// shuffled. Returns the matrix and the positions of the generating columns.
pub fn separable(rows: usize, cols: usize, k: usize, seed: u64) -> (DenseMatrix, Vec<usize>) {
    let mut r = rng(seed);
    let w = DenseMatrix::from_fn(rows, k, |_, _| r.random::<f64>());
    // mixing weights on the simplex, strictly inside so no mixed column
    // coincides with an anchor
    let mut h = DenseMatrix::zeros(k, cols);
    for j in 0..cols {
        if j < k {
            h[(j, j)] = 1.0;
        } else {
            let raw: Vec<f64> = (0..k).map(|_| 0.1 + r.random::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            for i in 0..k {
                h[(i, j)] = raw[i] / s;
            }
        }
    }
    let mut perm: Vec<usize> = (0..cols).collect();
    for i in (1..cols).rev() {
        let j = r.random_range(0..=i);
        perm.swap(i, j);
    }
    // column perm[j] of the result is column j of W·H
    let a0 = w.matmul(&h).unwrap();
    let mut a = DenseMatrix::zeros(rows, cols);
    for j in 0..cols {
        a.set_column(perm[j], &a0.column(j));
    }
    let mut anchors: Vec<usize> = (0..k).map(|j| perm[j]).collect();
    anchors.sort_unstable();
    (a, anchors)
}

/// `U·diag(sigma)·Vᵀ` with random orthonormal factors from Gaussian draws.
pub fn with_spectrum(rows: usize, sigma: &[f64], seed: u64) -> DenseMatrix {
    let n = sigma.len();
    let g = |r, c, s| tsfact::rng::gaussian_matrix(r, c, s, 0);
    let u = tsfact::linalg::thin_qr(&g(rows, n, seed)).unwrap().0;
    let v = tsfact::linalg::thin_qr(&g(n, n, seed ^ 0xabcdef)).unwrap().0;
    let us = DenseMatrix::from_fn(rows, n, |i, j| u[(i, j)] * sigma[j]);
    us.matmul(&v.transpose()).unwrap()
}
