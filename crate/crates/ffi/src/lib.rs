//! C ABI over `tsfact`.
//!
//! Matrices and execution contexts cross the boundary as opaque handles that
//! the caller frees with the matching `_free` function. Every fallible call
//! returns a [`TsfactStatus`]; on failure the message is available from
//! [`tsfact_last_error`] on the same thread. Panics never unwind into C.
//!
//! Matrices are row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tsfact::cx::cx;
use tsfact::io::{read_matrix, write_matrix};
use tsfact::kernels::tsqr;
use tsfact::linalg::DenseMatrix;
use tsfact::nmf::nmf;
use tsfact::pca::{pca, PcaOptions};
use tsfact::runtime::{DistMatrix, ExecContext, RunConfig, DEFAULT_SEED};
use tsfact::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TsfactStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    NonFinite = 4,
    Convergence = 5,
    Config = 6,
    StageFailed = 7,
    Data = 8,
    NegativeEntry = 9,
    Numeric = 10,
    Format = 11,
    Io = 12,
    Parse = 13,
    Resource = 14,
    Panic = 15,
}

impl From<&Error> for TsfactStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension(_) => TsfactStatus::Dimension,
            Error::NonFinite { .. } => TsfactStatus::NonFinite,
            Error::Convergence { .. } => TsfactStatus::Convergence,
            Error::Config(_) => TsfactStatus::Config,
            Error::Resource(_) => TsfactStatus::Resource,
            Error::StageFailed { .. } => TsfactStatus::StageFailed,
            Error::Data(_) => TsfactStatus::Data,
            Error::NegativeEntry { .. } => TsfactStatus::NegativeEntry,
            Error::Numeric(_) => TsfactStatus::Numeric,
            Error::Format { .. } | Error::Length { .. } => TsfactStatus::Format,
            Error::Parse { .. } | Error::Json(_) => TsfactStatus::Parse,
            Error::Io { .. } => TsfactStatus::Io,
        }
    }
}

/// Opaque dense matrix.
pub struct TsfactMatrix {
    inner: DenseMatrix,
}

/// Opaque execution context: a worker pool plus its run configuration.
pub struct TsfactContext {
    inner: ExecContext,
}

/// Runtime settings for [`tsfact_context_new`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct TsfactConfig {
    pub executors: usize,
    pub slots_per_executor: usize,
    /// Row blocks per input matrix; capped at the matrix's row count.
    pub partitions: usize,
    pub tree_fanout: usize,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: TsfactStatus, msg: impl Into<String>) -> TsfactStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), TsfactStatus>) -> TsfactStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TsfactStatus::Ok,
        Ok(Err(status)) => status,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(TsfactStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn check(e: Error) -> TsfactStatus {
    let status = TsfactStatus::from(&e);
    fail(status, e.to_string())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, TsfactStatus> {
    p.as_ref()
        .ok_or_else(|| fail(TsfactStatus::NullPointer, format!("{what} is null")))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, TsfactStatus> {
    if p.is_null() {
        return Err(fail(TsfactStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(TsfactStatus::InvalidArgument, "path is not valid UTF-8"))
}

unsafe fn store(out: *mut *mut TsfactMatrix, m: DenseMatrix) {
    *out = Box::into_raw(Box::new(TsfactMatrix { inner: m }));
}

fn require_out<T>(out: *mut T, what: &str) -> Result<(), TsfactStatus> {
    if out.is_null() {
        Err(fail(TsfactStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn distribute(ctx: &ExecContext, m: &DenseMatrix) -> Result<DistMatrix, TsfactStatus> {
    let p = ctx.config().partitions.min(m.rows()).max(1);
    DistMatrix::partition(m, p).map_err(check)
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tsfact_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default runtime settings: one executor with four slots, eight
/// partitions, binary reduction tree, fixed seed.
#[no_mangle]
pub extern "C" fn tsfact_config_default() -> TsfactConfig {
    let d = RunConfig::default();
    TsfactConfig {
        executors: d.executors,
        slots_per_executor: d.slots_per_executor,
        partitions: d.partitions,
        tree_fanout: d.tree_fanout,
        seed: DEFAULT_SEED,
    }
}

/// Creates a matrix. `data` holds `rows * cols` row-major values, or is
/// null for a zero matrix.
///
/// # Safety
/// `data`, when non-null, must point to `rows * cols` readable doubles.
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn tsfact_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut TsfactMatrix,
) -> TsfactStatus {
    guard(|| {
        require_out(out, "out")?;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| fail(TsfactStatus::InvalidArgument, "rows * cols overflows"))?;
        let m = if data.is_null() {
            DenseMatrix::zeros(rows, cols)
        } else {
            let values = std::slice::from_raw_parts(data, len).to_vec();
            DenseMatrix::new_finite(rows, cols, values, "matrix data").map_err(check)?
        };
        store(out, m);
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from this library that is not used again.
#[no_mangle]
pub unsafe extern "C" fn tsfact_matrix_free(m: *mut TsfactMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be null or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn tsfact_matrix_rows(m: *const TsfactMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.rows())
}

/// # Safety
/// `m` must be null or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn tsfact_matrix_cols(m: *const TsfactMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.cols())
}

/// Copies the row-major entries into `out`, which has room for `len`
/// doubles; `len` must equal rows * cols.
///
/// # Safety
/// `m` must be a live matrix handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tsfact_matrix_copy_data(m: *const TsfactMatrix, out: *mut f64, len: usize) -> TsfactStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        require_out(out, "out")?;
        let src = m.inner.as_slice();
        if len != src.len() {
            return Err(fail(
                TsfactStatus::InvalidArgument,
                format!("buffer holds {len} values, matrix has {}", src.len()),
            ));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, len);
        Ok(())
    })
}

/// Reads a TSMA file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn tsfact_matrix_read(path: *const c_char, out: *mut *mut TsfactMatrix) -> TsfactStatus {
    guard(|| {
        require_out(out, "out")?;
        let path = path_arg(path)?;
        let m = read_matrix(path).map_err(check)?;
        store(out, m);
        Ok(())
    })
}

/// Writes a TSMA file.
///
/// # Safety
/// `m` must be a live matrix handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tsfact_matrix_write(m: *const TsfactMatrix, path: *const c_char) -> TsfactStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        let path = path_arg(path)?;
        write_matrix(path, &m.inner).map_err(check)
    })
}

/// Starts a worker pool. `config` may be null for the defaults.
///
/// # Safety
/// `config` must be null or point to a valid [`TsfactConfig`]; `out` must be a
/// valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn tsfact_context_new(config: *const TsfactConfig, out: *mut *mut TsfactContext) -> TsfactStatus {
    guard(|| {
        require_out(out, "out")?;
        let c = config.as_ref().copied().unwrap_or_else(|| tsfact_config_default());
        let cfg = RunConfig {
            executors: c.executors,
            slots_per_executor: c.slots_per_executor,
            partitions: c.partitions,
            tree_fanout: c.tree_fanout,
            seed: c.seed,
            ..RunConfig::default()
        };
        let ctx = ExecContext::new(cfg).map_err(check)?;
        *out = Box::into_raw(Box::new(TsfactContext { inner: ctx }));
        Ok(())
    })
}

/// Stops the worker pool.
///
/// # Safety
/// `ctx` must be null or a handle from this library that is not used again.
#[no_mangle]
pub unsafe extern "C" fn tsfact_context_free(ctx: *mut TsfactContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Number of stages the context has executed so far.
///
/// # Safety
/// `ctx` must be null or a live context handle.
#[no_mangle]
pub unsafe extern "C" fn tsfact_context_stages(ctx: *const TsfactContext) -> usize {
    ctx.as_ref().map_or(0, |c| c.inner.stages_executed())
}

/// `R` factor of `a` by tree TSQR; `n x n`, nonnegative diagonal.
///
/// # Safety
/// `ctx` and `a` must be live handles; `r_out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn tsfact_tsqr(
    ctx: *const TsfactContext,
    a: *const TsfactMatrix,
    r_out: *mut *mut TsfactMatrix,
) -> TsfactStatus {
    guard(|| {
        let ctx = &deref(ctx, "context")?.inner;
        let a = deref(a, "matrix")?;
        require_out(r_out, "r_out")?;
        let d = distribute(ctx, &a.inner)?;
        let r = tsqr(ctx, &d).map_err(check)?;
        store(r_out, r);
        Ok(())
    })
}

/// Rank-`k` PCA (`center != 0`) or truncated SVD (`center == 0`).
/// Outputs `U` (m x k), `S` (k x 1) and `V` (n x k).
///
/// # Safety
/// `ctx` and `a` must be live handles; the output pointers valid handle slots.
#[no_mangle]
pub unsafe extern "C" fn tsfact_pca(
    ctx: *const TsfactContext,
    a: *const TsfactMatrix,
    k: usize,
    center: i32,
    tol: f64,
    max_iters: usize,
    u_out: *mut *mut TsfactMatrix,
    s_out: *mut *mut TsfactMatrix,
    v_out: *mut *mut TsfactMatrix,
) -> TsfactStatus {
    guard(|| {
        let ctx = &deref(ctx, "context")?.inner;
        let a = deref(a, "matrix")?;
        require_out(u_out, "u_out")?;
        require_out(s_out, "s_out")?;
        require_out(v_out, "v_out")?;
        let d = distribute(ctx, &a.inner)?;
        let opts = PcaOptions {
            center: center != 0,
            tol,
            max_iters,
            ..PcaOptions::new(k)
        };
        let res = pca(ctx, &d, &opts).map_err(check)?;
        let f = res.factors;
        store(s_out, DenseMatrix::column_vector(&f.sigma));
        store(u_out, f.u);
        store(v_out, f.v);
        Ok(())
    })
}

/// Rank-`k` separable NMF. Writes the `k` selected column ids to
/// `selected` and outputs `W` (m x k) and `H` (k x n).
///
/// # Safety
/// `ctx` and `a` must be live handles, `selected` must have room for `k`
/// values, and the output pointers must be valid handle slots.
#[no_mangle]
pub unsafe extern "C" fn tsfact_nmf(
    ctx: *const TsfactContext,
    a: *const TsfactMatrix,
    k: usize,
    selected: *mut usize,
    w_out: *mut *mut TsfactMatrix,
    h_out: *mut *mut TsfactMatrix,
) -> TsfactStatus {
    guard(|| {
        let ctx = &deref(ctx, "context")?.inner;
        let a = deref(a, "matrix")?;
        require_out(selected, "selected")?;
        require_out(w_out, "w_out")?;
        require_out(h_out, "h_out")?;
        let d = distribute(ctx, &a.inner)?;
        let res = nmf(ctx, &d, k).map_err(check)?;
        ptr::copy_nonoverlapping(res.selected.as_ptr(), selected, res.selected.len());
        store(w_out, res.w);
        store(h_out, res.h);
        Ok(())
    })
}

/// CX decomposition with `k` sampled columns. Writes the sampled column ids
/// to `indices` and outputs `C` (m x k) and `X` (k x n).
///
/// # Safety
/// `ctx` and `a` must be live handles, `indices` must have room for `k`
/// values, and the output pointers must be valid handle slots.
#[no_mangle]
pub unsafe extern "C" fn tsfact_cx(
    ctx: *const TsfactContext,
    a: *const TsfactMatrix,
    k: usize,
    slack: usize,
    power_iters: usize,
    seed: u64,
    indices: *mut usize,
    c_out: *mut *mut TsfactMatrix,
    x_out: *mut *mut TsfactMatrix,
) -> TsfactStatus {
    guard(|| {
        let ctx = &deref(ctx, "context")?.inner;
        let a = deref(a, "matrix")?;
        require_out(indices, "indices")?;
        require_out(c_out, "c_out")?;
        require_out(x_out, "x_out")?;
        let d = distribute(ctx, &a.inner)?;
        let res = cx(ctx, &d, k, slack, power_iters, seed).map_err(check)?;
        ptr::copy_nonoverlapping(res.indices.as_ptr(), indices, res.indices.len());
        store(c_out, res.c);
        store(x_out, res.x);
        Ok(())
    })
}
