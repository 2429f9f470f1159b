use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use gamma_dpp::gamma_kernel::{kernel_entry, AdmissibleParams, LatticePoint};
use gamma_dpp_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(gdpp_last_error()) }.to_string_lossy().into_owned()
}

fn params(z: (f64, f64), zp: (f64, f64)) -> *mut GdppParams {
    let mut p = ptr::null_mut();
    let s = unsafe { gdpp_params_new(z.0, z.1, zp.0, zp.1, &mut p) };
    assert_eq!(s, GdppStatus::Ok, "{}", last_error());
    p
}

#[test]
fn entries_match_the_library() {
    let p = params((0.4, 0.7), (0.4, -0.7));
    let q = AdmissibleParams::principal(0.4, 0.7).unwrap();
    for (kx, ky) in [(0, 0), (-3, 5), (10, -10), (2, 3)] {
        let mut v = f64::NAN;
        assert_eq!(unsafe { gdpp_kernel_entry(p, kx, ky, &mut v) }, GdppStatus::Ok);
        assert_eq!(v, kernel_entry(&q, LatticePoint(kx), LatticePoint(ky)).unwrap());
    }
    let (mut rho, mut diag, mut c) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(gdpp_rho1(p, 4, &mut rho), GdppStatus::Ok);
        assert_eq!(gdpp_kernel_entry(p, 4, 4, &mut diag), GdppStatus::Ok);
        assert_eq!(gdpp_c_constant(p, &mut c), GdppStatus::Ok);
        gdpp_params_free(p);
    }
    assert_eq!(rho, diag);
    assert!(c > 0.0);
    assert!(last_error().is_empty());
}

#[test]
fn inadmissible_and_null_arguments_report_errors() {
    let mut p = ptr::null_mut();
    let s = unsafe { gdpp_params_new(0.4, 0.7, 0.4, 0.7, &mut p) };
    assert_eq!(s, GdppStatus::NotAdmissible);
    assert!(p.is_null());
    assert!(last_error().contains("not admissible"));

    assert_eq!(unsafe { gdpp_params_new(0.1, 0.0, 0.2, 0.0, ptr::null_mut()) }, GdppStatus::NullPointer);
    let mut v = 0.0;
    assert_eq!(unsafe { gdpp_rho1(ptr::null(), 0, &mut v) }, GdppStatus::NullPointer);
    assert_eq!(unsafe { gdpp_kernel_matrix_dim(ptr::null()) }, 0);
    unsafe {
        gdpp_params_free(ptr::null_mut());
        gdpp_kernel_matrix_free(ptr::null_mut());
    }
}

#[test]
fn kernel_matrix_round_trip_and_conditioning() {
    let p = params((0.4, 0.7), (0.4, -0.7));
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { gdpp_kernel_matrix_new(p, 4, &mut m) }, GdppStatus::Ok);
    let n = unsafe { gdpp_kernel_matrix_dim(m) };
    assert_eq!(n, 8);

    let mut sites = vec![0i64; n];
    assert_eq!(unsafe { gdpp_kernel_matrix_sites(m, sites.as_mut_ptr(), n) }, GdppStatus::Ok);
    assert_eq!(sites, (-4..4).collect::<Vec<_>>());

    let mut entries = vec![0.0; n * n];
    assert_eq!(unsafe { gdpp_kernel_matrix_copy(m, entries.as_mut_ptr(), n) }, GdppStatus::BufferTooSmall);
    assert_eq!(unsafe { gdpp_kernel_matrix_copy(m, entries.as_mut_ptr(), n * n) }, GdppStatus::Ok);
    let mut k01 = 0.0;
    unsafe { gdpp_kernel_entry(p, -4, -3, &mut k01) };
    assert!((entries[1] - k01).abs() < 1e-15);

    let mut palm = ptr::null_mut();
    let mut hole = ptr::null_mut();
    unsafe {
        assert_eq!(gdpp_kernel_matrix_reduced_palm(m, 0, &mut palm), GdppStatus::Ok);
        assert_eq!(gdpp_kernel_matrix_hole(m, 0, &mut hole), GdppStatus::Ok);
        assert_eq!(gdpp_kernel_matrix_dim(palm), n - 1);
        assert_eq!(gdpp_kernel_matrix_dim(hole), n - 1);
        let mut out = ptr::null_mut();
        assert_eq!(gdpp_kernel_matrix_reduced_palm(m, 40, &mut out), GdppStatus::InvalidArgument);
        assert!(out.is_null());
    }

    // K_p(x, x) = K(x, x) − K(x, p)K(p, x)/K(p, p), site −4 is row 0 of both
    let mut palm_entries = vec![0.0; (n - 1) * (n - 1)];
    unsafe { gdpp_kernel_matrix_copy(palm, palm_entries.as_mut_ptr(), palm_entries.len()) };
    let (kpp, kxp) = (entries[4 * n + 4], entries[4]);
    assert!((palm_entries[0] - (entries[0] - kxp * kxp / kpp)).abs() < 1e-14);

    unsafe {
        gdpp_kernel_matrix_free(palm);
        gdpp_kernel_matrix_free(hole);
        gdpp_kernel_matrix_free(m);
        gdpp_params_free(p);
    }
}

#[test]
fn entries_constructor_validates_spectrum() {
    let mut m = ptr::null_mut();
    let bad = [2.0, 0.0, 0.0, 0.5];
    assert_eq!(unsafe { gdpp_kernel_matrix_from_entries(2, bad.as_ptr(), &mut m) }, GdppStatus::Numerical);
    assert!(last_error().contains("outside"));

    let proj = [0.5, 0.5, 0.5, 0.5];
    assert_eq!(unsafe { gdpp_kernel_matrix_from_entries(2, proj.as_ptr(), &mut m) }, GdppStatus::Ok);

    // rank one projection: exactly one point, at 0 or 1
    let mut buf = [0i64; 2];
    for index in 0..20 {
        let mut count = 0usize;
        assert_eq!(unsafe { gdpp_sample(m, 7, index, buf.as_mut_ptr(), 2, &mut count) }, GdppStatus::Ok);
        assert_eq!(count, 1);
        assert!(buf[0] == 0 || buf[0] == 1);
    }
    let mut count = 0usize;
    assert_eq!(unsafe { gdpp_sample(m, 7, 0, ptr::null_mut(), 0, &mut count) }, GdppStatus::BufferTooSmall);
    assert_eq!(count, 1);

    // E[Π a] = det(I + (a − 1)K) = 1 + (a₀ − 1)/2 + (a₁ − 1)/2 for a rank one projection
    let a = [3.0, 0.5];
    let mut e = 0.0;
    assert_eq!(unsafe { gdpp_expect_multiplicative(m, a.as_ptr(), 2, &mut e) }, GdppStatus::Ok);
    assert!((e - 1.75).abs() < 1e-14);
    assert_eq!(unsafe { gdpp_expect_multiplicative(m, a.as_ptr(), 1, &mut e) }, GdppStatus::InvalidArgument);
    unsafe { gdpp_kernel_matrix_free(m) };
}

#[test]
fn sampling_is_reproducible() {
    let p = params((0.4, 0.7), (0.4, -0.7));
    let mut m = ptr::null_mut();
    unsafe { gdpp_kernel_matrix_new(p, 10, &mut m) };
    let draw = |index| {
        let mut buf = vec![0i64; 20];
        let mut count = 0;
        assert_eq!(unsafe { gdpp_sample(m, 11, index, buf.as_mut_ptr(), 20, &mut count) }, GdppStatus::Ok);
        buf.truncate(count);
        buf
    };
    assert_eq!(draw(3), draw(3));
    let distinct: std::collections::HashSet<_> = (0..10).map(draw).collect();
    assert!(distinct.len() > 1);
    unsafe {
        gdpp_kernel_matrix_free(m);
        gdpp_params_free(p);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/gamma_dpp.h");
    assert!(header.exists());
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["gdpp_params_new", "gdpp_kernel_matrix_reduced_palm", "gdpp_sample", "GDPP_STATUS_PANIC"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(status) = Command::new("cc").args(["-std=c99", "-fsyntax-only", "-x", "c"]).arg(&header).status() else {
        eprintln!("no C compiler, syntax check skipped");
        return;
    };
    assert!(status.success());
}
