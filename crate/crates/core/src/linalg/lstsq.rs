use super::matrix::DenseMatrix;
use super::svd::{thin_svd, SpectralFactors};
use crate::error::{Error, Result};

/// Singular values at or below this fraction of the largest (scaled by the
/// larger dimension) are treated as zero.
pub(crate) fn rank_cutoff(svd: &SpectralFactors, rows: usize, cols: usize) -> f64 {
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    smax * (rows.max(cols) as f64) * f64::EPSILON
}

/// `V · Σ⁺ · P` where `P = Uᵀ·A` has already been formed (possibly in a
/// distributed stage).
pub(crate) fn apply_pseudo_inverse(svd: &SpectralFactors, ut_a: &DenseMatrix, cutoff: f64) -> DenseMatrix {
    let r = svd.rank();
    let mut scaled = ut_a.clone();
    for i in 0..r {
        let s = svd.sigma[i];
        let inv = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
        for x in scaled.row_mut(i) {
            *x *= inv;
        }
    }
    svd.v.matmul(&scaled).expect("pseudo-inverse shapes agree")
}

/// Minimum-norm solution of `min ‖A − C·X‖_F`.
pub fn least_squares(c: &DenseMatrix, a: &DenseMatrix) -> Result<DenseMatrix> {
    if c.rows() != a.rows() {
        return Err(Error::dim(format!(
            "least squares needs matching rows, got C {}x{} and A {}x{}",
            c.rows(),
            c.cols(),
            a.rows(),
            a.cols()
        )));
    }
    if c.cols() == 0 {
        return Ok(DenseMatrix::zeros(0, a.cols()));
    }
    let svd = thin_svd(c)?;
    let ut_a = svd.u.t_matmul(a)?;
    let cutoff = rank_cutoff(&svd, c.rows(), c.cols());
    Ok(apply_pseudo_inverse(&svd, &ut_a, cutoff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::qr::thin_qr;
    use crate::linalg::testutil::random_matrix;

    #[test]
    fn orthonormal_c_gives_projection_coefficients() {
        let (q, _) = thin_qr(&random_matrix(20, 4, 1)).unwrap();
        let a = random_matrix(20, 6, 2);
        let x = least_squares(&q, &a).unwrap();
        let expected = q.t_matmul(&a).unwrap();
        assert!(x.sub(&expected).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn self_solve_is_identity() {
        let a = random_matrix(15, 5, 3);
        let x = least_squares(&a, &a).unwrap();
        assert!(x.sub(&DenseMatrix::identity(5)).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn duplicate_columns_min_norm() {
        let a = random_matrix(10, 1, 4);
        let c = a.select_columns(&[0, 0]).unwrap();
        let x = least_squares(&c, &a).unwrap();
        // min-norm splits the coefficient evenly
        assert!((x[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((x[(1, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn row_mismatch() {
        assert!(least_squares(&DenseMatrix::zeros(3, 1), &DenseMatrix::zeros(4, 1)).is_err());
    }
}
