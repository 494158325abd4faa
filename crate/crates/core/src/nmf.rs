//! One-pass separable NMF: TSQR to `R`, greedy extreme-column selection on
//! `R`, then `W` sliced out of `A`.
//!
//! Because `A = Q·R` with orthonormal `Q`, `‖A − A(:,K)·H‖_F` equals
//! `‖R − R(:,K)·H‖_F`, so both the column selection and the nonnegative
//! coefficients can be computed from the small `n × n` factor alone.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::{gather_columns, tsqr};
use crate::linalg::{dot, nnls, norm2, DenseMatrix};
use crate::runtime::{DistMatrix, ExecContext, RowBlock};

/// Entries in `(-NEGATIVE_TOLERANCE, 0)` are clamped to zero; anything more
/// negative is rejected.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct NmfResult {
    /// Selected column indices of `A`, in selection order.
    pub selected: Vec<usize>,
    /// `k × n`, nonnegative.
    pub h: DenseMatrix,
    /// `A(:, selected)`, `m × k`.
    pub w: DenseMatrix,
    /// TSQR factor of `A`.
    pub r: DenseMatrix,
    /// `‖R − R(:,K)·H‖_F / ‖R‖_F`.
    pub relative_residual: f64,
}

/// Nonnegative coefficients of every column of `r` against `r(:, selected)`.
fn refit(r: &DenseMatrix, selected: &[usize]) -> Result<DenseMatrix> {
    let basis = r.select_columns(selected)?;
    let n = r.cols();
    let mut h = DenseMatrix::zeros(selected.len(), n);
    for l in 0..n {
        let coef = nnls(&basis, &r.column(l))?;
        h.set_column(l, &coef);
    }
    Ok(h)
}

fn residual(r: &DenseMatrix, selected: &[usize], h: &DenseMatrix) -> Result<DenseMatrix> {
    if selected.is_empty() {
        return Ok(r.clone());
    }
    r.sub(&r.select_columns(selected)?.matmul(h)?)
}

/// Greedy extreme-column selection with nonnegative refit.
///
/// Each step takes the residual column `d` of largest norm and picks the
/// unselected column maximizing `dᵀr_j / pᵀr_j`, where `p = R·1` (the image
/// of `A`'s row sums, so `pᵀr_j = (A·1)ᵀa_j > 0` for nonnegative `A`).
/// Ties go to the smallest index. After each pick, `H` is refit column by
/// column with NNLS against `R(:, K)`.
pub fn xray(r: &DenseMatrix, k: usize) -> Result<(Vec<usize>, DenseMatrix)> {
    let n = r.cols();
    if k == 0 || k > n {
        return Err(Error::dim(format!("xray needs 1 <= k <= {n}, got k={k}")));
    }
    r.check_finite("xray input")?;
    let cols: Vec<Vec<f64>> = (0..n).map(|j| r.column(j)).collect();
    let col_norms: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    let scale = r.frobenius_norm();
    let tiny = scale * 1e-13;
    let p: Vec<f64> = (0..r.rows()).map(|i| r.row(i).iter().sum()).collect();
    let denom: Vec<f64> = cols.iter().map(|c| dot(&p, c)).collect();

    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut h = DenseMatrix::zeros(0, n);
    let mut resid = r.clone();

    for _ in 0..k {
        let is_free = |j: usize| !selected.contains(&j);
        let resid_norms: Vec<f64> = (0..n).map(|j| norm2(&resid.column(j))).collect();
        let (lead, lead_norm) = argmax((0..n).map(|j| (j, resid_norms[j]))).expect("n >= 1");

        let mut pick = None;
        if lead_norm > tiny {
            let d = resid.column(lead);
            pick = argmax(
                (0..n)
                    .filter(|&j| is_free(j) && col_norms[j] > tiny && denom[j] > 0.0)
                    .map(|j| (j, dot(&d, &cols[j]) / denom[j])),
            )
            .filter(|&(_, score)| score > 0.0)
            .map(|(j, _)| j);
        }
        // Residual exhausted (or no admissible score): take the largest
        // remaining nonzero column, then any remaining column.
        let pick = pick
            .or_else(|| {
                argmax((0..n).filter(|&j| is_free(j) && col_norms[j] > tiny).map(|j| (j, col_norms[j])))
                    .map(|(j, _)| j)
            })
            .or_else(|| (0..n).find(|&j| is_free(j)))
            .expect("k <= n leaves a free column");

        selected.push(pick);
        h = refit(r, &selected)?;
        resid = residual(r, &selected, &h)?;
    }
    Ok((selected, h))
}

/// First index attaining the maximum value.
fn argmax(items: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in items {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((j, v)),
        }
    }
    best
}

/// Smallest entry of a block and its position.
fn block_minimum(blk: &RowBlock) -> Option<(f64, usize, usize)> {
    let cols = blk.data.cols();
    blk.data
        .as_slice()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(p, &v)| (v, blk.row_offset + p / cols, p % cols))
}

/// Checks the nonnegativity precondition and clamps tiny negatives.
fn nonnegative_input(ctx: &ExecContext, a: &DistMatrix) -> Result<DistMatrix> {
    let (minima, _) = ctx.collect_stage("check_nonnegative", a, block_minimum)?;
    let mut needs_clamp = false;
    for (partition, m) in minima.iter().enumerate() {
        if let Some((value, row, col)) = *m {
            if value <= -NEGATIVE_TOLERANCE || value.is_nan() {
                return Err(Error::NegativeEntry {
                    partition,
                    row,
                    col,
                    value,
                });
            }
            needs_clamp |= value < 0.0;
        }
    }
    if !needs_clamp {
        return Ok(a.clone());
    }
    let blocks: Vec<Arc<RowBlock>> = a
        .blocks()
        .iter()
        .zip(&minima)
        .map(|(blk, m)| match m {
            Some((v, _, _)) if *v < 0.0 => {
                let mut data = blk.data.clone();
                for x in data.as_mut_slice() {
                    if *x < 0.0 {
                        *x = 0.0;
                    }
                }
                Arc::new(RowBlock {
                    row_offset: blk.row_offset,
                    data,
                })
            }
            _ => Arc::clone(blk),
        })
        .collect();
    Ok(DistMatrix::from_shared(blocks, a.cols()))
}

/// Rank-`k` separable NMF `A ≈ W·H` with `W = A(:, K)`.
pub fn nmf(ctx: &ExecContext, a: &DistMatrix, k: usize) -> Result<NmfResult> {
    let n = a.cols();
    if k == 0 || k > n {
        return Err(Error::dim(format!("nmf needs 1 <= k <= {n}, got k={k}")));
    }
    let a = nonnegative_input(ctx, a)?;
    let r = tsqr(ctx, &a)?;
    let (selected, h) = xray(&r, k)?;
    let w = gather_columns(ctx, &a, &selected)?;
    let rn = r.frobenius_norm();
    let rel = if rn > 0.0 {
        residual(&r, &selected, &h)?.frobenius_norm() / rn
    } else {
        0.0
    };
    Ok(NmfResult {
        selected,
        h,
        w,
        r,
        relative_residual: rel,
    })
}

/// `‖A − A(:,K)·H‖_F` computed over the row blocks of `A`.
pub fn factorization_residual(
    ctx: &ExecContext,
    a: &DistMatrix,
    selected: &[usize],
    h: &DenseMatrix,
) -> Result<f64> {
    if h.rows() != selected.len() || h.cols() != a.cols() {
        return Err(Error::dim(format!(
            "H must be {}x{}, got {}x{}",
            selected.len(),
            a.cols(),
            h.rows(),
            h.cols()
        )));
    }
    let idx = Arc::new(selected.to_vec());
    let h = Arc::new(h.clone());
    let (sq, _) = ctx.execute_stage(
        "nmf_residual",
        a,
        move |blk| {
            let wh = blk.data.select_columns(&idx).expect("indices checked").matmul(&h).expect("shapes");
            let d = blk.data.sub(&wh).expect("shapes");
            dot(d.as_slice(), d.as_slice())
        },
        |x, y| x + y,
    )?;
    Ok(sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::{random_matrix, random_nonneg};
    use crate::runtime::RunConfig;

    fn ctx() -> ExecContext {
        ExecContext::new(RunConfig::default()).unwrap()
    }

    #[test]
    fn small_example_selects_extremes() {
        let r = DenseMatrix::from_rows(&[[1.0, 0.0, 0.5], [0.0, 1.0, 0.5]]);
        let (k, h) = xray(&r, 2).unwrap();
        assert_eq!(k, vec![0, 1]);
        assert!((h[(0, 2)] - 0.5).abs() < 1e-14);
        assert!((h[(1, 2)] - 0.5).abs() < 1e-14);
        assert!(residual(&r, &k, &h).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn full_rank_k_equals_n() {
        let r = crate::linalg::qr_r(&random_nonneg(20, 5, 3));
        let (k, h) = xray(&r, 5).unwrap();
        let mut sorted = k.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        assert!(residual(&r, &k, &h).unwrap().frobenius_norm() < 1e-10 * r.frobenius_norm());
    }

    #[test]
    fn diagonal_selects_all_with_scaling() {
        let r = DenseMatrix::from_diag(&[2.0, 5.0, 1.0]);
        let (k, h) = xray(&r, 3).unwrap();
        assert_eq!(k, vec![1, 0, 2]);
        // H(:, j) is the unit vector selecting column j
        for (row, &col) in k.iter().enumerate() {
            assert!((h[(row, col)] - 1.0).abs() < 1e-14);
        }
        assert!(h.as_slice().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn zero_columns_are_picked_last() {
        let r = DenseMatrix::from_rows(&[[0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]);
        let (k, _) = xray(&r, 3).unwrap();
        assert_eq!(k[2], 0);
        assert!(xray(&r, 4).is_err());
        assert!(xray(&r, 0).is_err());
    }

    #[test]
    fn rejects_negative_and_clamps_tiny() {
        let c = ctx();
        let mut m = random_nonneg(20, 3, 1);
        m[(13, 1)] = -0.5;
        let a = DistMatrix::partition(&m, 4).unwrap();
        match nmf(&c, &a, 2) {
            Err(Error::NegativeEntry { partition, row, col, .. }) => {
                assert_eq!((partition, row, col), (2, 13, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
        m[(13, 1)] = -1e-12;
        let a = DistMatrix::partition(&m, 4).unwrap();
        let res = nmf(&c, &a, 3).unwrap();
        assert!(res.w.as_slice().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn distributed_residual_matches_r_residual() {
        let c = ctx();
        let m = random_nonneg(60, 6, 2);
        let a = DistMatrix::partition(&m, 3).unwrap();
        let res = nmf(&c, &a, 3).unwrap();
        let direct = factorization_residual(&c, &a, &res.selected, &res.h).unwrap();
        let via_r = res.relative_residual * res.r.frobenius_norm();
        assert!((direct - via_r).abs() <= 1e-8 * direct.max(1e-300));
        assert_eq!(res.w, m.select_columns(&res.selected).unwrap());
    }

    #[test]
    fn generic_r_does_not_panic() {
        let r = random_matrix(4, 4, 8);
        let (k, h) = xray(&r, 4).unwrap();
        assert_eq!(k.len(), 4);
        assert!(h.as_slice().iter().all(|&x| x >= 0.0));
    }
}
