//! Lawson–Hanson active-set nonnegative least squares.

use super::lstsq::least_squares;
use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Solves `min ‖M·x − b‖₂` subject to `x ≥ 0`.
pub fn nnls(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let (rows, n) = m.shape();
    if rows != b.len() {
        return Err(Error::dim(format!(
            "nnls: matrix has {rows} rows but rhs has {}",
            b.len()
        )));
    }
    let mut x = vec![0.0; n];
    if n == 0 {
        return Ok(x);
    }
    let scale = m.frobenius_norm() * b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Ok(x);
    }
    let tol = 10.0 * f64::EPSILON * scale * (rows.max(n) as f64);

    let mut passive = vec![false; n];
    // Indices that failed to enter the passive set since the last successful
    // change; prevents cycling on degenerate columns.
    let mut blocked = vec![false; n];
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = negative_gradient(m, b, &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && !blocked[j] && w[j] > tol)
            .max_by(|&a, &c| w[a].total_cmp(&w[c]).then(c.cmp(&a)));
        let Some(j) = candidate else { break };
        passive[j] = true;

        for _ in 0..max_outer {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            if idx.is_empty() {
                break;
            }
            let z = solve_passive(m, b, &idx)?;
            if z.iter().all(|&zi| zi > 0.0) {
                for (&i, &zi) in idx.iter().zip(&z) {
                    x[i] = zi;
                }
                break;
            }
            // Step from x toward z until the first passive coordinate hits zero.
            let mut alpha = f64::INFINITY;
            let mut hit = idx[0];
            for (&i, &zi) in idx.iter().zip(&z) {
                if zi <= 0.0 {
                    let denom = x[i] - zi;
                    let a = if denom > 0.0 { x[i] / denom } else { 0.0 };
                    if a < alpha {
                        alpha = a;
                        hit = i;
                    }
                }
            }
            for (&i, &zi) in idx.iter().zip(&z) {
                x[i] += alpha * (zi - x[i]);
            }
            x[hit] = 0.0;
            for &i in &idx {
                if x[i] <= 0.0 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
        }

        if passive[j] {
            blocked.iter_mut().for_each(|v| *v = false);
        } else {
            blocked[j] = true;
        }
    }
    Ok(x)
}

/// `Mᵀ(b − M·x)`.
fn negative_gradient(m: &DenseMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mx = m.matvec(x).expect("shapes checked");
    let r: Vec<f64> = b.iter().zip(&mx).map(|(bi, mi)| bi - mi).collect();
    m.t_matvec(&r).expect("shapes checked")
}

fn solve_passive(m: &DenseMatrix, b: &[f64], idx: &[usize]) -> Result<Vec<f64>> {
    let sub = m.select_columns(idx)?;
    let rhs = DenseMatrix::column_vector(b);
    let z = least_squares(&sub, &rhs)?;
    Ok(z.into_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::random_matrix;

    fn gradient(m: &DenseMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
        negative_gradient(m, b, x).into_iter().map(|v| -v).collect()
    }

    #[test]
    fn projection_onto_orthant() {
        let x = nnls(&DenseMatrix::identity(2), &[1.0, -2.0]).unwrap();
        assert_eq!(x, vec![1.0, 0.0]);
    }

    #[test]
    fn unconstrained_optimum_already_feasible() {
        let m = DenseMatrix::from_rows(&[[1.0], [1.0]]);
        let x = nnls(&m, &[1.0, 3.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_returns_zero() {
        assert_eq!(nnls(&DenseMatrix::zeros(3, 2), &[1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn recovers_consistent_solution() {
        let m = random_matrix(20, 5, 7);
        let truth = [0.5, 0.0, 1.5, 0.0, 2.0];
        let b = m.matvec(&truth).unwrap();
        let x = nnls(&m, &b).unwrap();
        for (a, e) in x.iter().zip(&truth) {
            assert!((a - e).abs() < 1e-8, "{x:?}");
        }
    }

    #[test]
    fn kkt_conditions_hold() {
        for seed in 0..20 {
            let m = random_matrix(15, 8, 100 + seed);
            let b = random_matrix(15, 1, 200 + seed).into_vec();
            let x = nnls(&m, &b).unwrap();
            let g = gradient(&m, &b, &x);
            for (xi, gi) in x.iter().zip(&g) {
                assert!(*xi >= 0.0);
                if *xi > 0.0 {
                    assert!(gi.abs() <= 1e-8, "free coordinate gradient {gi}");
                } else {
                    assert!(*gi >= -1e-8, "bound coordinate gradient {gi}");
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(nnls(&DenseMatrix::zeros(3, 2), &[1.0]).is_err());
    }
}
