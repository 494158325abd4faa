//! CX decomposition: randomized SVD for approximate right singular vectors,
//! leverage-score column sampling, and the optimal coefficient matrix `X`.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::{gather_columns, multiply_collect, multiply_gramian};
use crate::linalg::{apply_pseudo_inverse, normalize_signs, rank_cutoff, thin_qr, thin_svd, DenseMatrix, SpectralFactors};
use crate::rng::{gaussian_matrix, generator, stream};
use crate::runtime::{DistMatrix, ExecContext};

pub const DEFAULT_SLACK: usize = 5;
pub const DEFAULT_POWER_ITERS: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct CxResult {
    /// Sampled column ids, with multiplicity, in draw order.
    pub indices: Vec<usize>,
    pub c: DenseMatrix,
    pub x: DenseMatrix,
    pub leverage: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub seed: u64,
}

/// Rank-`k` randomized SVD with `q` power rounds. Reads `A` exactly `q + 1`
/// times: once per round of `AᵀA·B`, and once for the final `A·Q`.
pub fn randomized_svd(
    ctx: &ExecContext,
    a: &DistMatrix,
    k: usize,
    slack: usize,
    q: usize,
    seed: u64,
) -> Result<SpectralFactors> {
    let n = a.cols();
    let width = k + slack;
    if k == 0 || width > n || k > a.rows() {
        return Err(Error::dim(format!(
            "randomized SVD needs 1 <= k, k + slack <= {n} and k <= {}, got k={k}, slack={slack}",
            a.rows()
        )));
    }
    if q == 0 {
        return Err(Error::Config("power iterations must be at least 1".into()));
    }
    let mut b = gaussian_matrix(n, width, seed, stream::SKETCH);
    for round in 0..q {
        let g = multiply_gramian(ctx, a, &b)?;
        if !g.is_finite() {
            return Err(Error::Numeric(format!("non-finite Gramian product in power round {round}")));
        }
        b = thin_qr(&g)?.0;
    }
    let basis = b.leading_columns(k)?;
    let y = multiply_collect(ctx, a, &basis)?;
    if !y.is_finite() {
        return Err(Error::Numeric("non-finite sketch A·Q".into()));
    }
    let small = thin_svd(&y)?;
    let mut u = small.u;
    let mut v = basis.matmul(&small.v)?;
    normalize_signs(&mut u, &mut v);
    Ok(SpectralFactors {
        u,
        sigma: small.sigma,
        v,
    })
}

/// Row-wise squared norms of `v`.
pub fn leverage_scores(v: &DenseMatrix) -> Vec<f64> {
    (0..v.rows()).map(|i| v.row(i).iter().map(|x| x * x).sum()).collect()
}

/// `k` i.i.d. draws from `p` by inverse CDF. `p` is renormalized first.
pub fn sample_columns(p: &[f64], k: usize, seed: u64) -> Result<Vec<usize>> {
    if let Some(bad) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::Data(format!("sampling weights must be finite and nonnegative, got {bad}")));
    }
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for &x in p {
        acc += x;
        cdf.push(acc);
    }
    if acc <= 0.0 {
        return Err(Error::Data("sampling weights are all zero".into()));
    }
    let mut rng = generator(seed, stream::COLUMN_SAMPLING);
    let draws = (0..k)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let j = cdf.partition_point(|&c| c <= u);
            // rounding can leave u at the very top; fall back to the last
            // index with positive weight
            j.min(p.iter().rposition(|&x| x > 0.0).expect("total is positive"))
        })
        .collect();
    Ok(draws)
}

/// Optimal `X = C⁺A` for a column subset `C` of `A`. The SVD of `C` is local
/// and `U_Cᵀ·A` is one distributed pass.
pub fn cx_coefficients(ctx: &ExecContext, a: &DistMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    if c.rows() != a.rows() {
        return Err(Error::dim(format!(
            "C has {} rows, A has {}",
            c.rows(),
            a.rows()
        )));
    }
    let svd = thin_svd(c)?;
    let u = Arc::new(svd.u.clone());
    let (ut_a, _) = ctx.execute_stage(
        "cx_project",
        a,
        move |blk| {
            let rows = u.row_range(blk.row_offset, blk.row_offset + blk.rows());
            rows.t_matmul(&blk.data).expect("same row count")
        },
        |x, y| x.add(&y).expect("same shape"),
    )?;
    let cutoff = rank_cutoff(&svd, c.rows(), c.cols());
    Ok(apply_pseudo_inverse(&svd, &ut_a, cutoff))
}

/// CX with `k` sampled columns. `q` and `slack` drive the randomized SVD
/// and `seed` drives both the sketch and the column draws.
pub fn cx(ctx: &ExecContext, a: &DistMatrix, k: usize, slack: usize, q: usize, seed: u64) -> Result<CxResult> {
    let svd = randomized_svd(ctx, a, k, slack, q, seed)?;
    let leverage = leverage_scores(&svd.v.leading_columns(k)?);
    let total: f64 = leverage.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numeric("leverage scores sum to zero".into()));
    }
    let probabilities: Vec<f64> = leverage.iter().map(|l| l / total).collect();
    let indices = sample_columns(&probabilities, k, seed)?;
    let c = gather_columns(ctx, a, &indices)?;
    let x = cx_coefficients(ctx, a, &c)?;
    Ok(CxResult {
        indices,
        c,
        x,
        leverage,
        probabilities,
        seed,
    })
}
