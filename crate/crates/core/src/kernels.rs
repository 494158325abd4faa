//! Distributed primitives built on [`ExecContext::execute_stage`]. Each call
//! is exactly one stage, i.e. one pass over the row blocks.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{qr_r, DenseMatrix};
use crate::runtime::{DistMatrix, ExecContext};

/// `AᵀA·B`, summing `A₍ᵢ₎ᵀ(A₍ᵢ₎·B)` over blocks in one round.
pub fn multiply_gramian(ctx: &ExecContext, a: &DistMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if b.rows() != a.cols() {
        return Err(Error::dim(format!(
            "gramian product needs B with {} rows, got {}x{}",
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let b = Arc::new(b.clone());
    let (out, _) = ctx.execute_stage(
        "multiply_gramian",
        a,
        move |blk| {
            let ab = blk.data.matmul(&b).expect("shapes checked");
            blk.data.t_matmul(&ab).expect("shapes checked")
        },
        |x, y| x.add(&y).expect("same shape"),
    )?;
    Ok(out)
}

/// `A·B`, gathered on the driver in global row order.
pub fn multiply_collect(ctx: &ExecContext, a: &DistMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if b.rows() != a.cols() {
        return Err(Error::dim(format!(
            "product needs B with {} rows, got {}x{}",
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let b = Arc::new(b.clone());
    let (parts, _) = ctx.collect_stage("multiply_collect", a, move |blk| {
        blk.data.matmul(&b).expect("shapes checked")
    })?;
    let refs: Vec<&DenseMatrix> = parts.iter().collect();
    DenseMatrix::vstack(&refs)
}

/// `R` factor of a tall-and-skinny QR by tree reduction: each task factors
/// its block, and the driver re-factors stacked pairs of `R` factors level by
/// level. The result is `n × n`, upper triangular, with nonnegative diagonal.
pub fn tsqr(ctx: &ExecContext, a: &DistMatrix) -> Result<DenseMatrix> {
    if a.cols() > a.rows() {
        return Err(Error::dim(format!(
            "TSQR needs at least as many rows as columns, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let (r, _) = ctx.execute_stage(
        "tsqr",
        a,
        |blk| qr_r(&blk.data),
        |top, bottom| qr_r(&DenseMatrix::vstack(&[&top, &bottom]).expect("same width")),
    )?;
    Ok(r)
}

/// The listed columns of `A` (duplicates kept), gathered on the driver.
/// Entries are copied, never recomputed.
pub fn gather_columns(ctx: &ExecContext, a: &DistMatrix, indices: &[usize]) -> Result<DenseMatrix> {
    if let Some(&bad) = indices.iter().find(|&&j| j >= a.cols()) {
        return Err(Error::dim(format!(
            "column index {bad} out of range for {} columns",
            a.cols()
        )));
    }
    let idx: Arc<Vec<usize>> = Arc::new(indices.to_vec());
    let (parts, _) = ctx.collect_stage("gather_columns", a, move |blk| {
        blk.data.select_columns(&idx).expect("indices checked")
    })?;
    let refs: Vec<&DenseMatrix> = parts.iter().collect();
    DenseMatrix::vstack(&refs)
}

/// Column sums of `A` in one tree-sum stage.
pub fn column_sums(ctx: &ExecContext, a: &DistMatrix) -> Result<Vec<f64>> {
    let (sums, _) = ctx.execute_stage(
        "column_sums",
        a,
        |blk| {
            let mut s = vec![0.0; blk.data.cols()];
            for i in 0..blk.rows() {
                for (acc, v) in s.iter_mut().zip(blk.data.row(i)) {
                    *acc += v;
                }
            }
            s
        },
        |mut x, y| {
            for (a, b) in x.iter_mut().zip(&y) {
                *a += b;
            }
            x
        },
    )?;
    Ok(sums)
}
