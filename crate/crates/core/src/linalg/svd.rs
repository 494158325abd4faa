use super::matrix::{axpy, dot, norm2, DenseMatrix};
use super::qr::thin_qr;
use crate::error::Result;

/// Truncated or thin singular factors `U · diag(sigma) · Vᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFactors {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl SpectralFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U · diag(sigma) · Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (x, s) in us.row_mut(i).iter_mut().zip(&self.sigma) {
                *x *= s;
            }
        }
        us.matmul(&self.v.transpose()).expect("factor shapes agree")
    }

    /// Keeps the leading `k` triplets.
    pub fn truncate(&self, k: usize) -> SpectralFactors {
        let k = k.min(self.rank());
        SpectralFactors {
            u: self.u.leading_columns(k).expect("k <= rank"),
            sigma: self.sigma[..k].to_vec(),
            v: self.v.leading_columns(k).expect("k <= rank"),
        }
    }
}

const MAX_SWEEPS: usize = 80;

/// One-sided Jacobi SVD of a square column-major matrix `g` (n × n).
/// On return `g` holds `U·Σ` column-wise and `v` the right vectors.
fn one_sided_jacobi(n: usize, g: &mut [f64], v: &mut [f64]) {
    let eps = f64::EPSILON;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (gp, gq) = column_pair(g, n, p, q);
                let alpha = dot(gp, gp);
                let beta = dot(gq, gq);
                let gamma = dot(gp, gq);
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(gp, gq, c, s);
                let (vp, vq) = column_pair(v, n, p, q);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
}

fn column_pair(buf: &mut [f64], n: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (a, b) = buf.split_at_mut(q * n);
    (&mut a[p * n..(p + 1) * n], &mut b[..n])
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Flips columns so that the first significant entry of each column of `v`
/// is positive, applying the same flip to the paired column of `u`.
pub(crate) fn normalize_signs(u: &mut DenseMatrix, v: &mut DenseMatrix) {
    for j in 0..v.cols() {
        let col = v.column(j);
        let scale = col.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let lead = col.iter().copied().find(|x| x.abs() > 1e-8 * scale);
        if matches!(lead, Some(x) if x < 0.0) {
            for i in 0..v.rows() {
                v[(i, j)] = -v[(i, j)];
            }
            for i in 0..u.rows() {
                u[(i, j)] = -u[(i, j)];
            }
        }
    }
}

/// Fills the listed (zeroed) columns with an orthonormal completion of the others.
fn complete_basis(n_rows: usize, cols: &mut [Vec<f64>], missing: &[usize]) {
    let mut candidate = 0usize;
    for &j in missing {
        loop {
            let mut e = vec![0.0; n_rows];
            e[candidate % n_rows] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (i, c) in cols.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let s = dot(c, &e);
                    axpy(-s, c, &mut e);
                }
            }
            let nrm = norm2(&e);
            if nrm > 1e-6 {
                e.iter_mut().for_each(|x| *x /= nrm);
                cols[j] = e;
                break;
            }
            if candidate > 2 * n_rows + missing.len() {
                // cannot happen for a valid rank count, but never loop forever
                cols[j] = vec![0.0; n_rows];
                break;
            }
        }
    }
}

/// SVD of a square upper-triangular-or-general small matrix via one-sided Jacobi.
fn small_svd(r: &DenseMatrix) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
    let n = r.cols();
    debug_assert_eq!(r.rows(), n);
    let mut g = r.to_col_major();
    let mut v = DenseMatrix::identity(n).to_col_major();
    one_sided_jacobi(n, &mut g, &mut v);

    let norms: Vec<f64> = (0..n).map(|j| norm2(&g[j * n..(j + 1) * n])).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let cutoff = smax * (n as f64) * f64::EPSILON;

    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (pos, &j) in order.iter().enumerate() {
        let col = &g[j * n..(j + 1) * n];
        if norms[j] > cutoff && norms[j] > 0.0 {
            ucols.push(col.iter().map(|x| x / norms[j]).collect());
        } else {
            ucols.push(vec![0.0; n]);
            missing.push(pos);
        }
    }
    if !missing.is_empty() {
        complete_basis(n, &mut ucols, &missing);
    }

    let mut u = DenseMatrix::zeros(n, n);
    let mut vs = DenseMatrix::zeros(n, n);
    for (pos, &j) in order.iter().enumerate() {
        u.set_column(pos, &ucols[pos]);
        vs.set_column(pos, &v[j * n..(j + 1) * n]);
    }
    (u, sigma, vs)
}

/// Thin SVD: for an `m × n` input, returns `U` (`m × r`), `sigma` (`r`,
/// descending) and `V` (`n × r`) with `r = min(m, n)`.
pub fn thin_svd(m: &DenseMatrix) -> Result<SpectralFactors> {
    m.check_finite("thin_svd input")?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(SpectralFactors {
            u: DenseMatrix::zeros(rows, 0),
            sigma: Vec::new(),
            v: DenseMatrix::zeros(cols, 0),
        });
    }
    if rows < cols {
        let t = thin_svd(&m.transpose())?;
        let (mut u, mut v) = (t.v, t.u);
        normalize_signs(&mut u, &mut v);
        return Ok(SpectralFactors {
            u,
            sigma: t.sigma,
            v,
        });
    }
    let (q, r) = thin_qr(m)?;
    let (ur, sigma, v) = small_svd(&r);
    let mut u = q.matmul(&ur)?;
    let mut v = v;
    normalize_signs(&mut u, &mut v);
    Ok(SpectralFactors { u, sigma, v })
}
