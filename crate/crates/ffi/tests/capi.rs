use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use tsfact_ffi::*;

fn last_error() -> String {
    let p = tsfact_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn matrix(rows: usize, cols: usize, data: &[f64]) -> *mut TsfactMatrix {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { tsfact_matrix_new(rows, cols, data.as_ptr(), &mut m) }, TsfactStatus::Ok);
    m
}

fn values(m: *const TsfactMatrix) -> Vec<f64> {
    let n = unsafe { tsfact_matrix_rows(m) * tsfact_matrix_cols(m) };
    let mut out = vec![0.0; n];
    assert_eq!(unsafe { tsfact_matrix_copy_data(m, out.as_mut_ptr(), n) }, TsfactStatus::Ok);
    out
}

fn context(partitions: usize) -> *mut TsfactContext {
    let mut cfg = tsfact_config_default();
    cfg.partitions = partitions;
    let mut ctx = ptr::null_mut();
    assert_eq!(unsafe { tsfact_context_new(&cfg, &mut ctx) }, TsfactStatus::Ok);
    ctx
}

#[test]
fn matrix_lifecycle() {
    let m = matrix(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    unsafe {
        assert_eq!(tsfact_matrix_rows(m), 2);
        assert_eq!(tsfact_matrix_cols(m), 3);
    }
    assert_eq!(values(m), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let mut short = [0.0; 2];
    assert_eq!(
        unsafe { tsfact_matrix_copy_data(m, short.as_mut_ptr(), 2) },
        TsfactStatus::InvalidArgument
    );
    unsafe { tsfact_matrix_free(m) };
    unsafe { tsfact_matrix_free(ptr::null_mut()) };

    let mut z = ptr::null_mut();
    assert_eq!(unsafe { tsfact_matrix_new(2, 2, ptr::null(), &mut z) }, TsfactStatus::Ok);
    assert_eq!(values(z), vec![0.0; 4]);
    unsafe { tsfact_matrix_free(z) };
}

#[test]
fn rejects_bad_arguments() {
    let mut m = ptr::null_mut();
    let nan = [f64::NAN];
    assert_eq!(unsafe { tsfact_matrix_new(1, 1, nan.as_ptr(), &mut m) }, TsfactStatus::NonFinite);
    assert!(m.is_null());
    assert_eq!(
        unsafe { tsfact_matrix_new(1, 1, ptr::null(), ptr::null_mut()) },
        TsfactStatus::NullPointer
    );
    assert!(last_error().contains("null"));
    let mut cfg = tsfact_config_default();
    cfg.tree_fanout = 1;
    let mut ctx = ptr::null_mut();
    assert_eq!(unsafe { tsfact_context_new(&cfg, &mut ctx) }, TsfactStatus::Config);
    assert!(last_error().contains("fan-out"));
}

#[test]
fn file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.tsma").to_str().unwrap()).unwrap();
    let m = matrix(2, 2, &[1.5, -0.0, 3.0, 4.0]);
    assert_eq!(unsafe { tsfact_matrix_write(m, path.as_ptr()) }, TsfactStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { tsfact_matrix_read(path.as_ptr(), &mut back) }, TsfactStatus::Ok);
    assert_eq!(values(back), values(m));
    let missing = CString::new(dir.path().join("none.tsma").to_str().unwrap()).unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { tsfact_matrix_read(missing.as_ptr(), &mut none) }, TsfactStatus::Io);
    unsafe {
        tsfact_matrix_free(m);
        tsfact_matrix_free(back);
    }
}

#[test]
fn tsqr_of_stacked_identities() {
    let ctx = context(2);
    let a = matrix(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { tsfact_tsqr(ctx, a, &mut r) }, TsfactStatus::Ok);
    let s = 2f64.sqrt();
    for (got, want) in values(r).iter().zip([s, 0.0, 0.0, s]) {
        assert!((got - want).abs() < 1e-15);
    }
    assert_eq!(unsafe { tsfact_context_stages(ctx) }, 1);
    unsafe {
        tsfact_matrix_free(a);
        tsfact_matrix_free(r);
        tsfact_context_free(ctx);
    }
}

#[test]
fn pca_nmf_cx() {
    let ctx = context(3);
    let a = matrix(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 2.0, 0.0, -2.0]);
    let (mut u, mut s, mut v) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
    assert_eq!(
        unsafe { tsfact_pca(ctx, a, 1, 1, 1e-10, 100, &mut u, &mut s, &mut v) },
        TsfactStatus::Ok
    );
    assert!((values(s)[0] - 8f64.sqrt()).abs() < 1e-12);
    assert!((values(v)[1] - 1.0).abs() < 1e-10);
    assert_eq!(
        unsafe { tsfact_pca(ctx, a, 3, 1, 1e-10, 100, &mut u, &mut s, &mut v) },
        TsfactStatus::Dimension
    );

    let sep = matrix(4, 3, &[1.0, 0.0, 0.5, 0.0, 1.0, 0.5, 2.0, 0.0, 1.0, 0.0, 3.0, 1.5]);
    let mut picked = [usize::MAX; 2];
    let (mut w, mut h) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(
        unsafe { tsfact_nmf(ctx, sep, 2, picked.as_mut_ptr(), &mut w, &mut h) },
        TsfactStatus::Ok
    );
    picked.sort_unstable();
    assert_eq!(picked, [0, 1]);
    assert_eq!(
        unsafe { tsfact_nmf(ctx, a, 1, picked.as_mut_ptr(), &mut w, &mut h) },
        TsfactStatus::NegativeEntry
    );
    assert!(last_error().contains("block"));

    let mut idx = [0usize; 1];
    let (mut c, mut x) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(
        unsafe { tsfact_cx(ctx, sep, 1, 1, 2, 7, idx.as_mut_ptr(), &mut c, &mut x) },
        TsfactStatus::Ok,
        "{}",
        last_error()
    );
    assert_eq!(unsafe { tsfact_matrix_cols(x) }, 3, "{}", last_error());
    unsafe {
        for m in [a, u, s, v, sep, w, h, c, x] {
            tsfact_matrix_free(m);
        }
        tsfact_context_free(ctx);
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "tsfact.h"

int main(void) {
    double a[8] = {1, 0, 0, 1, 1, 0, 0, 1};
    TsfactMatrix *m = NULL, *r = NULL;
    TsfactContext *ctx = NULL;
    TsfactConfig cfg = tsfact_config_default();
    cfg.partitions = 2;
    if (tsfact_context_new(&cfg, &ctx) != TSFACT_STATUS_OK) return 10;
    if (tsfact_matrix_new(4, 2, a, &m) != TSFACT_STATUS_OK) return 11;
    if (tsfact_tsqr(ctx, m, &r) != TSFACT_STATUS_OK) return 12;
    double out[4];
    if (tsfact_matrix_copy_data(r, out, 4) != TSFACT_STATUS_OK) return 13;
    printf("%.15f %.15f\n", out[0], out[3]);
    if (tsfact_matrix_new(1, 1, NULL, NULL) != TSFACT_STATUS_NULL_POINTER) return 14;
    printf("%s\n", tsfact_last_error());
    tsfact_matrix_free(r);
    tsfact_matrix_free(m);
    tsfact_context_free(ctx);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // <target>/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = target_dir().join("libtsfact_ffi.a");
    assert!(include.join("tsfact.h").exists(), "header not generated");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("run cc");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "1.414213562373095 1.414213562373095");
    assert!(lines.next().unwrap().contains("null"));
}
