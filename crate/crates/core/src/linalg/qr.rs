//! Householder QR.
//!
//! The factorization runs on a column-major working copy so that every
//! reflector application is a contiguous dot/axpy pair. The diagonal of `R`
//! is forced nonnegative, which makes `R` unique for full-column-rank input;
//! rank-deficient input yields exact zeros on the diagonal instead of an error.

use super::matrix::{axpy, dot, norm2, DenseMatrix};
use crate::error::{Error, Result};

struct Householder {
    rows: usize,
    cols: usize,
    /// Column-major; `R` on and above the diagonal, reflector tails below it.
    packed: Vec<f64>,
    taus: Vec<f64>,
}

impl Householder {
    fn factor(m: &DenseMatrix) -> Self {
        let (rows, cols) = m.shape();
        let mut a = m.to_col_major();
        let steps = rows.min(cols);
        let mut taus = Vec::with_capacity(steps);

        for k in 0..steps {
            let (left, right) = a.split_at_mut((k + 1) * rows);
            let x = &mut left[k * rows + k..];
            let alpha = norm2(x);
            if alpha == 0.0 {
                taus.push(0.0);
                continue;
            }
            let x0 = x[0];
            let beta = if x0 >= 0.0 { -alpha } else { alpha };
            let tau = (beta - x0) / beta;
            let scale = 1.0 / (x0 - beta);
            for v in x[1..].iter_mut() {
                *v *= scale;
            }
            x[0] = 1.0;
            for j in 0..cols - k - 1 {
                let col = &mut right[j * rows + k..(j + 1) * rows];
                let s = tau * dot(x, col);
                axpy(-s, x, col);
            }
            x[0] = beta;
            taus.push(tau);
        }

        Householder {
            rows,
            cols,
            packed: a,
            taus,
        }
    }

    /// Upper-trapezoidal `min(rows, cols) × cols` factor, before sign fixing.
    fn r(&self) -> DenseMatrix {
        let steps = self.rows.min(self.cols);
        let mut r = DenseMatrix::zeros(steps, self.cols);
        for j in 0..self.cols {
            let col = &self.packed[j * self.rows..(j + 1) * self.rows];
            for i in 0..(j + 1).min(steps) {
                r[(i, j)] = col[i];
            }
        }
        r
    }

    /// First `cols` columns of the orthogonal factor, column-major.
    fn q_col_major(&self) -> Vec<f64> {
        let (rows, cols) = (self.rows, self.cols);
        let mut q = vec![0.0; rows * cols];
        for j in 0..cols {
            q[j * rows + j] = 1.0;
        }
        let mut v = Vec::with_capacity(rows);
        for k in (0..self.taus.len()).rev() {
            let tau = self.taus[k];
            if tau == 0.0 {
                continue;
            }
            v.clear();
            v.push(1.0);
            v.extend_from_slice(&self.packed[k * rows + k + 1..(k + 1) * rows]);
            for j in k..cols {
                let col = &mut q[j * rows + k..(j + 1) * rows];
                let s = tau * dot(&v, col);
                axpy(-s, &v, col);
            }
        }
        q
    }
}

fn fix_signs(r: &mut DenseMatrix, mut q: Option<&mut Vec<f64>>, rows: usize) {
    let steps = r.rows();
    let cols = r.cols();
    for i in 0..steps {
        if r[(i, i)] < 0.0 {
            for j in i..cols {
                r[(i, j)] = -r[(i, j)];
            }
            if let Some(q) = q.as_deref_mut() {
                for v in &mut q[i * rows..(i + 1) * rows] {
                    *v = -*v;
                }
            }
        }
    }
}

/// Thin QR of a matrix with `rows ≥ cols`: `Q` is `rows × cols` with
/// orthonormal columns and `R` is `cols × cols` upper triangular with a
/// nonnegative diagonal.
pub fn thin_qr(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(Error::dim(format!(
            "thin QR needs rows >= cols, got {rows}x{cols}"
        )));
    }
    m.check_finite("thin_qr input")?;
    let h = Householder::factor(m);
    let mut r = h.r();
    let mut q = h.q_col_major();
    fix_signs(&mut r, Some(&mut q), rows);
    Ok((DenseMatrix::from_col_major(rows, cols, &q), r))
}

/// The `R` factor alone, for any shape. Returns a `min(rows, cols) × cols`
/// upper-trapezoidal matrix with nonnegative diagonal; for `rows ≥ cols` it
/// is bitwise identical to the `R` from [`thin_qr`].
pub fn qr_r(m: &DenseMatrix) -> DenseMatrix {
    let h = Householder::factor(m);
    let mut r = h.r();
    fix_signs(&mut r, None, m.rows());
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::random_matrix;

    fn orthogonality_error(q: &DenseMatrix) -> f64 {
        let g = q.t_matmul(q).unwrap();
        g.sub(&DenseMatrix::identity(q.cols())).unwrap().max_abs()
    }

    #[test]
    fn identity_factors_trivially() {
        let (q, r) = thin_qr(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(q, DenseMatrix::identity(3));
        assert_eq!(r, DenseMatrix::identity(3));
    }

    #[test]
    fn scaled_orthogonal_columns() {
        let m = DenseMatrix::from_rows(&[[3.0, 0.0], [0.0, 4.0], [0.0, 0.0]]);
        let (q, r) = thin_qr(&m).unwrap();
        assert_eq!(q, DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]));
        assert_eq!(r, DenseMatrix::from_diag(&[3.0, 4.0]));
    }

    #[test]
    fn random_reconstruction() {
        let m = random_matrix(50, 5, 11);
        let (q, r) = thin_qr(&m).unwrap();
        assert!(orthogonality_error(&q) < 1e-12);
        let back = q.matmul(&r).unwrap();
        assert!(back.sub(&m).unwrap().frobenius_norm() <= 1e-12 * m.frobenius_norm());
        for i in 0..5 {
            assert!(r[(i, i)] >= 0.0);
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn wide_input_is_a_dimension_error() {
        assert!(matches!(
            thin_qr(&DenseMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn rank_deficient_gives_zero_diagonal() {
        // Second column is zero; third duplicates the first.
        let m = DenseMatrix::from_rows(&[[1.0, 0.0, 1.0], [2.0, 0.0, 2.0], [2.0, 0.0, 2.0], [0.0, 0.0, 0.0]]);
        let (q, r) = thin_qr(&m).unwrap();
        assert_eq!(r[(1, 1)], 0.0);
        assert!(r[(2, 2)].abs() < 1e-14);
        assert!(orthogonality_error(&q) < 1e-12);
        assert!(q.matmul(&r).unwrap().sub(&m).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn r_only_path_matches_bitwise() {
        let m = random_matrix(37, 6, 3);
        let (_, r) = thin_qr(&m).unwrap();
        assert_eq!(qr_r(&m), r);
        // deterministic across runs
        assert_eq!(qr_r(&m), qr_r(&m));
    }

    #[test]
    fn wide_r_factor_is_trapezoidal() {
        let m = random_matrix(2, 4, 5);
        let r = qr_r(&m);
        assert_eq!(r.shape(), (2, 4));
        assert_eq!(r[(1, 0)], 0.0);
        let g1 = m.t_matmul(&m).unwrap();
        let g2 = r.t_matmul(&r).unwrap();
        assert!(g1.sub(&g2).unwrap().max_abs() < 1e-12);
    }
}
