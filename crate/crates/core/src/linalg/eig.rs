//! Symmetric eigensolvers.
//!
//! [`symmetric_eigen`] is a dense cyclic Jacobi solver for small matrices.
//! [`symmetric_eigs`] is a matrix-free restarted Lanczos method for the
//! leading eigenpairs of a symmetric positive semidefinite operator. It keeps
//! the full basis and its image under the operator, reorthogonalizes every
//! new vector twice against the basis, and forms the projected matrix
//! explicitly, so residuals come for free from the stored images. Restarts
//! are thick: the best Ritz vectors are kept and the expansion continues
//! from the last orthogonalized residual direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{axpy, dot, norm2, DenseMatrix};
use super::svd::normalize_signs;
use crate::error::{Error, Result};

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a small dense symmetric matrix. Returns eigenvalues
/// in descending order and the matching orthonormal eigenvectors as columns.
/// Only the upper triangle is trusted; the input is symmetrized first.
pub fn symmetric_eigen(s: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::dim(format!(
            "symmetric_eigen needs a square matrix, got {}x{}",
            n,
            s.cols()
        )));
    }
    s.check_finite("symmetric_eigen input")?;
    let mut a = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius_norm();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(y, y)].total_cmp(&a[(x, x)]).then(x.cmp(&y)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = v.select_columns(&order)?;
    let mut dummy = DenseMatrix::zeros(0, n);
    normalize_signs(&mut dummy, &mut vectors);
    Ok((values, vectors))
}

/// Settings for [`symmetric_eigs`].
#[derive(Clone, Debug)]
pub struct EigsOptions {
    /// Relative residual target: `‖S v − λ v‖ ≤ tol · λ₁`.
    pub tol: f64,
    /// Maximum number of restart cycles.
    pub max_iters: usize,
    /// Krylov basis size per cycle; defaults to `max(2k + 1, k + 20)` capped at `n`.
    pub basis_size: Option<usize>,
    /// Run exactly `max_iters` cycles and skip the convergence test.
    pub fixed_iterations: bool,
    /// Seed for the starting vector.
    pub seed: u64,
}

impl Default for EigsOptions {
    fn default() -> Self {
        EigsOptions {
            tol: 1e-8,
            max_iters: 300,
            basis_size: None,
            fixed_iterations: false,
            seed: 0x5eed,
        }
    }
}

/// Per-restart convergence record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartLog {
    pub iteration: usize,
    pub matvecs: usize,
    pub ritz_values: Vec<f64>,
    pub residuals: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EigsResult {
    pub values: Vec<f64>,
    /// `n × k`, orthonormal columns.
    pub vectors: DenseMatrix,
    pub iterations: usize,
    pub matvecs: usize,
    /// Final residual norms `‖S vᵢ − λᵢ vᵢ‖`.
    pub residuals: Vec<f64>,
    pub log: Vec<RestartLog>,
}

fn orthogonalize(basis: &[Vec<f64>], x: &mut [f64]) {
    for _ in 0..2 {
        for b in basis {
            let s = dot(b, x);
            axpy(-s, b, x);
        }
    }
}

fn fresh_direction(rng: &mut ChaCha8Rng, basis: &[Vec<f64>], n: usize) -> Option<Vec<f64>> {
    if basis.len() >= n {
        return None;
    }
    for _ in 0..16 {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(basis, &mut x);
        let nrm = norm2(&x);
        if nrm > 1e-8 {
            x.iter_mut().for_each(|v| *v /= nrm);
            return Some(x);
        }
    }
    None
}

/// Leading `k` eigenpairs of the symmetric PSD operator `op` on `Rⁿ`.
///
/// `op` is called once per Krylov expansion step. Fails with
/// [`Error::Convergence`] if the residual target is not met within
/// `opts.max_iters` restart cycles (unless `fixed_iterations` is set).
pub fn symmetric_eigs<F>(n: usize, k: usize, mut op: F, opts: &EigsOptions) -> Result<EigsResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if k == 0 || k > n {
        return Err(Error::dim(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    if opts.max_iters == 0 {
        return Err(Error::Config("max_iters must be at least 1".into()));
    }
    let ncv = opts
        .basis_size
        .unwrap_or_else(|| (2 * k + 1).max(k + 20))
        .clamp(k, n);
    let keep = (k + (ncv - k) / 2).min(ncv.saturating_sub(1)).max(k.min(ncv));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(ncv);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(ncv);
    let mut pending = fresh_direction(&mut rng, &basis, n);
    let mut matvecs = 0usize;
    let mut log = Vec::new();
    let mut wmax = 0.0_f64;

    for iteration in 1..=opts.max_iters {
        while basis.len() < ncv {
            let Some(v) = pending.take() else { break };
            let w = op(&v)?;
            if w.len() != n {
                return Err(Error::dim(format!(
                    "operator returned length {} for dimension {n}",
                    w.len()
                )));
            }
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric("operator produced a non-finite value".into()));
            }
            matvecs += 1;
            wmax = wmax.max(norm2(&w));
            let mut r = w.clone();
            basis.push(v);
            images.push(w);
            orthogonalize(&basis, &mut r);
            let rn = norm2(&r);
            pending = if rn > 1e-12 * wmax && rn > 0.0 {
                r.iter_mut().for_each(|x| *x /= rn);
                Some(r)
            } else {
                fresh_direction(&mut rng, &basis, n)
            };
        }

        let m = basis.len();
        let h = DenseMatrix::from_fn(m, m, |i, j| dot(&basis[i], &images[j]));
        let (theta, y) = symmetric_eigen(&h)?;

        let ritz = |cols: &[Vec<f64>], c: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (i, col) in cols.iter().enumerate() {
                axpy(y[(i, c)], col, &mut out);
            }
            out
        };

        let mut residuals = Vec::with_capacity(k);
        for c in 0..k {
            let x = ritz(&basis, c);
            let mut sx = ritz(&images, c);
            axpy(-theta[c], &x, &mut sx);
            residuals.push(norm2(&sx));
        }
        log.push(RestartLog {
            iteration,
            matvecs,
            ritz_values: theta[..k].to_vec(),
            residuals: residuals.clone(),
        });

        let lambda1 = theta[0].abs();
        let converged = m == n || residuals.iter().all(|&r| r <= opts.tol * lambda1);
        let last = iteration == opts.max_iters;
        if (converged && !opts.fixed_iterations) || (last && opts.fixed_iterations) {
            let mut vectors = DenseMatrix::zeros(n, k);
            for c in 0..k {
                vectors.set_column(c, &ritz(&basis, c));
            }
            let mut dummy = DenseMatrix::zeros(0, k);
            normalize_signs(&mut dummy, &mut vectors);
            return Ok(EigsResult {
                values: theta[..k].to_vec(),
                vectors,
                iterations: iteration,
                matvecs,
                residuals,
                log,
            });
        }
        if last {
            return Err(Error::Convergence {
                iterations: iteration,
                residuals,
            });
        }

        // thick restart
        let l = keep.min(m);
        let new_basis: Vec<Vec<f64>> = (0..l).map(|c| ritz(&basis, c)).collect();
        let new_images: Vec<Vec<f64>> = (0..l).map(|c| ritz(&images, c)).collect();
        basis = new_basis;
        images = new_images;
        pending = match pending {
            Some(mut p) => {
                orthogonalize(&basis, &mut p);
                let pn = norm2(&p);
                if pn > 1e-8 {
                    p.iter_mut().for_each(|x| *x /= pn);
                    Some(p)
                } else {
                    fresh_direction(&mut rng, &basis, n)
                }
            }
            None => fresh_direction(&mut rng, &basis, n),
        };
    }
    unreachable!("loop returns on the last iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::random_matrix;

    fn dense_op(s: &DenseMatrix) -> impl FnMut(&[f64]) -> Result<Vec<f64>> + '_ {
        move |v| s.matvec(v)
    }

    #[test]
    fn dense_jacobi_diagonal() {
        let (vals, vecs) = symmetric_eigen(&DenseMatrix::from_diag(&[1.0, 5.0, 2.0])).unwrap();
        assert_eq!(vals, vec![5.0, 2.0, 1.0]);
        assert_eq!(vecs[(1, 0)], 1.0);
    }

    #[test]
    fn diagonal_operator() {
        let s = DenseMatrix::from_diag(&[5.0, 2.0, 1.0]);
        let r = symmetric_eigs(3, 2, dense_op(&s), &EigsOptions::default()).unwrap();
        assert!((r.values[0] - 5.0).abs() < 1e-12);
        assert!((r.values[1] - 2.0).abs() < 1e-12);
        assert!((r.vectors[(0, 0)].abs() - 1.0).abs() < 1e-10);
        assert!((r.vectors[(1, 1)].abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identity_operator_breakdown() {
        let r = symmetric_eigs(6, 3, |v: &[f64]| Ok(v.to_vec()), &EigsOptions::default()).unwrap();
        for v in &r.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let g = r.vectors.t_matmul(&r.vectors).unwrap();
        assert!(g.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn restarts_on_large_operator() {
        // Small basis forces several thick restarts.
        let a = random_matrix(300, 120, 8);
        let s = a.t_matmul(&a).unwrap();
        let opts = EigsOptions {
            basis_size: Some(12),
            ..EigsOptions::default()
        };
        let r = symmetric_eigs(120, 4, dense_op(&s), &opts).unwrap();
        assert!(r.iterations > 1);
        let (dense, _) = symmetric_eigen(&s).unwrap();
        for i in 0..4 {
            assert!((r.values[i] - dense[i]).abs() <= 1e-8 * dense[0]);
            assert!(r.residuals[i] <= 1e-8 * r.values[0]);
        }
    }

    #[test]
    fn non_convergence_reports_residuals() {
        let a = random_matrix(200, 100, 2);
        let s = a.t_matmul(&a).unwrap();
        let opts = EigsOptions {
            basis_size: Some(6),
            max_iters: 1,
            tol: 1e-14,
            ..EigsOptions::default()
        };
        match symmetric_eigs(100, 3, dense_op(&s), &opts) {
            Err(Error::Convergence { iterations, residuals }) => {
                assert_eq!(iterations, 1);
                assert_eq!(residuals.len(), 3);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn fixed_iteration_mode_runs_exact_count() {
        let a = random_matrix(80, 30, 4);
        let s = a.t_matmul(&a).unwrap();
        let opts = EigsOptions {
            basis_size: Some(8),
            max_iters: 7,
            fixed_iterations: true,
            ..EigsOptions::default()
        };
        let r = symmetric_eigs(30, 2, dense_op(&s), &opts).unwrap();
        assert_eq!(r.iterations, 7);
        assert_eq!(r.log.len(), 7);
    }

    #[test]
    fn rejects_bad_rank() {
        assert!(symmetric_eigs(3, 0, |v: &[f64]| Ok(v.to_vec()), &EigsOptions::default()).is_err());
        assert!(symmetric_eigs(3, 4, |v: &[f64]| Ok(v.to_vec()), &EigsOptions::default()).is_err());
    }
}
