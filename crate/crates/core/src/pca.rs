//! Rank-k PCA / truncated SVD of a row-partitioned matrix.
//!
//! The right singular vectors come from a matrix-free eigensolve of the
//! Gramian, applied one distributed pass per operator call. The left vectors
//! and singular values come from a local SVD of `A·V` on the driver.
//! Column centering is applied implicitly as a rank-one correction, so the
//! centered matrix is never formed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{column_sums, multiply_collect, multiply_gramian};
use crate::linalg::{dot, normalize_signs, symmetric_eigs, thin_svd, DenseMatrix, EigsOptions, RestartLog, SpectralFactors};
use crate::rng::{mix, stream};
use crate::runtime::{DistMatrix, ExecContext};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PcaOptions {
    pub k: usize,
    pub center: bool,
    pub tol: f64,
    pub max_iters: usize,
    /// Run exactly `max_iters` eigensolver restarts, skipping the convergence test.
    pub fixed_iterations: bool,
    pub basis_size: Option<usize>,
}

impl PcaOptions {
    pub fn new(k: usize) -> Self {
        PcaOptions {
            k,
            center: true,
            tol: 1e-8,
            max_iters: 300,
            fixed_iterations: false,
            basis_size: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PcaResult {
    pub factors: SpectralFactors,
    pub iterations_used: usize,
    pub matvecs: usize,
    pub centered: bool,
    /// Zero when `centered` is false.
    pub column_means: Vec<f64>,
    pub eig_log: Vec<RestartLog>,
}

/// Mean of each column, via one tree-sum stage.
pub fn column_means(ctx: &ExecContext, a: &DistMatrix) -> Result<Vec<f64>> {
    let m = a.rows() as f64;
    Ok(column_sums(ctx, a)?.into_iter().map(|s| s / m).collect())
}

pub fn pca(ctx: &ExecContext, a: &DistMatrix, opts: &PcaOptions) -> Result<PcaResult> {
    let (m, n) = (a.rows(), a.cols());
    let k = opts.k;
    if k == 0 || k > m.min(n) {
        return Err(Error::dim(format!(
            "rank k must satisfy 1 <= k <= min(m, n) = {}, got {k}",
            m.min(n)
        )));
    }

    let mu = if opts.center {
        column_means(ctx, a)?
    } else {
        vec![0.0; n]
    };
    let mf = m as f64;

    let op = |v: &[f64]| -> Result<Vec<f64>> {
        let g = multiply_gramian(ctx, a, &DenseMatrix::column_vector(v))?;
        let mut out = g.into_vec();
        if opts.center {
            let s = mf * dot(&mu, v);
            for (o, &u) in out.iter_mut().zip(&mu) {
                *o -= s * u;
            }
        }
        Ok(out)
    };
    let eig_opts = EigsOptions {
        tol: opts.tol,
        max_iters: opts.max_iters,
        basis_size: opts.basis_size,
        fixed_iterations: opts.fixed_iterations,
        seed: mix(ctx.config().seed ^ stream::EIGS_START),
    };
    let eig = symmetric_eigs(n, k, op, &eig_opts)?;
    let v = eig.vectors;

    let mut y = multiply_collect(ctx, a, &v)?;
    if opts.center {
        let shift = v.t_matvec(&mu)?;
        for i in 0..y.rows() {
            for (x, s) in y.row_mut(i).iter_mut().zip(&shift) {
                *x -= s;
            }
        }
    }
    let svd = thin_svd(&y)?;
    let mut u = svd.u;
    let mut v_final = v.matmul(&svd.v)?;
    normalize_signs(&mut u, &mut v_final);

    Ok(PcaResult {
        factors: SpectralFactors {
            u,
            sigma: svd.sigma,
            v: v_final,
        },
        iterations_used: eig.iterations,
        matvecs: eig.matvecs,
        centered: opts.center,
        column_means: mu,
        eig_log: eig.log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::random_matrix;
    use crate::runtime::RunConfig;

    fn ctx() -> ExecContext {
        ExecContext::new(RunConfig {
            executors: 1,
            slots_per_executor: 4,
            ..RunConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn means() {
        let c = ctx();
        let a = DistMatrix::partition(&DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]), 2).unwrap();
        assert_eq!(column_means(&c, &a).unwrap(), vec![2.0, 3.0]);
        let z = DistMatrix::partition(&DenseMatrix::zeros(5, 3), 2).unwrap();
        assert_eq!(column_means(&c, &z).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn already_centered_rank_one() {
        let c = ctx();
        let m = DenseMatrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 2.0], [0.0, -2.0]]);
        let a = DistMatrix::partition(&m, 2).unwrap();
        let r = pca(&c, &a, &PcaOptions::new(1)).unwrap();
        assert!((r.factors.sigma[0] - 8f64.sqrt()).abs() < 1e-12);
        assert!(r.factors.v[(0, 0)].abs() < 1e-10);
        assert!((r.factors.v[(1, 0)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_column_contributes_zero() {
        let c = ctx();
        let mut m = random_matrix(30, 3, 5);
        for i in 0..30 {
            m[(i, 2)] = 4.0;
        }
        let a = DistMatrix::partition(&m, 3).unwrap();
        let r = pca(&c, &a, &PcaOptions::new(3)).unwrap();
        assert!(r.factors.sigma[2] < 1e-7 * r.factors.sigma[0]);
    }

    #[test]
    fn rank_bounds() {
        let c = ctx();
        let a = DistMatrix::partition(&random_matrix(10, 3, 1), 2).unwrap();
        assert!(pca(&c, &a, &PcaOptions::new(0)).is_err());
        assert!(pca(&c, &a, &PcaOptions::new(4)).is_err());
    }

    #[test]
    fn fixed_iteration_budget() {
        let c = ctx();
        let a = DistMatrix::partition(&random_matrix(60, 20, 2), 4).unwrap();
        let opts = PcaOptions {
            fixed_iterations: true,
            max_iters: 3,
            basis_size: Some(8),
            ..PcaOptions::new(2)
        };
        let r = pca(&c, &a, &opts).unwrap();
        assert_eq!(r.iterations_used, 3);
        assert_eq!(r.eig_log.len(), 3);
    }
}
