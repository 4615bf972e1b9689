use std::ffi::{CStr, CString};
use std::ptr;

use htstep_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe {
        htstep_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn rank_one(n: [usize; 3]) -> Vec<f64> {
    let mut v = Vec::new();
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                v.push((1.0 + i as f64) * (2.0 - j as f64) * (0.5 + k as f64));
            }
        }
    }
    v
}

#[test]
fn dense_round_trip_and_queries() {
    let dims = [4usize, 3, 5];
    let data = rank_one(dims);
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(htstep_tensor_from_dense(data.as_ptr(), dims.as_ptr(), 3, 1e-12, &mut t), HtstepStatus::Ok);
        assert_eq!(htstep_tensor_order(t), 3);

        let mut len = 0;
        assert_eq!(htstep_tensor_dims(t, ptr::null_mut(), 0, &mut len), HtstepStatus::Ok);
        assert_eq!(len, 3);
        let mut got = [0usize; 3];
        assert_eq!(htstep_tensor_dims(t, got.as_mut_ptr(), 3, &mut len), HtstepStatus::Ok);
        assert_eq!(got, dims);

        let mut ranks = [0usize; 8];
        assert_eq!(htstep_tensor_ranks(t, ranks.as_mut_ptr(), ranks.len(), &mut len), HtstepStatus::Ok);
        assert!(ranks[..len].iter().all(|&r| r == 1), "{:?}", &ranks[..len]);

        let mut back = vec![0.0; data.len()];
        assert_eq!(htstep_tensor_to_dense(t, back.as_mut_ptr(), back.len(), &mut len), HtstepStatus::Ok);
        let norm: f64 = data.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: f64 = data.iter().zip(&back).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!(diff <= 1e-12 * norm, "{diff}");
        assert!((htstep_tensor_norm(t) - norm).abs() <= 1e-12 * norm);

        let mut short = [0.0; 4];
        assert_eq!(htstep_tensor_to_dense(t, short.as_mut_ptr(), 4, &mut len), HtstepStatus::BufferTooSmall);
        assert_eq!(len, 60);
        assert!(last_error().contains("60"));
        htstep_tensor_free(t);
    }
}

#[test]
fn truncation_and_file_io() {
    let dims = [6usize, 6, 6];
    let data: Vec<f64> = (0..216).map(|i| ((i * 37 % 101) as f64).sin()).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("t.htk").to_str().unwrap()).unwrap();
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(htstep_tensor_from_dense(data.as_ptr(), dims.as_ptr(), 3, 0.0, &mut t), HtstepStatus::Ok);
        let mut r = ptr::null_mut();
        let mut est = -1.0;
        assert_eq!(htstep_tensor_truncate_rank(t, 2, &mut r, &mut est), HtstepStatus::Ok);
        let mut ranks = [0usize; 5];
        let mut len = 0;
        htstep_tensor_ranks(r, ranks.as_mut_ptr(), 5, &mut len);
        assert!(ranks[1..len].iter().all(|&k| k <= 2));
        assert!(est > 0.0);

        let mut s = ptr::null_mut();
        assert_eq!(htstep_tensor_truncate(t, 0.5 * htstep_tensor_norm(t), &mut s, &mut est), HtstepStatus::Ok);
        assert!(est <= 0.5 * htstep_tensor_norm(t));

        assert_eq!(htstep_tensor_write(s, path.as_ptr()), HtstepStatus::Ok);
        let mut u = ptr::null_mut();
        assert_eq!(htstep_tensor_read(path.as_ptr(), &mut u), HtstepStatus::Ok);
        assert_eq!(htstep_tensor_norm(u), htstep_tensor_norm(s));

        let missing = CString::new("/nonexistent/x.htk").unwrap();
        let mut v = ptr::null_mut();
        assert_eq!(htstep_tensor_read(missing.as_ptr(), &mut v), HtstepStatus::Io);
        assert!(v.is_null());
        for h in [t, r, s, u] {
            htstep_tensor_free(h);
        }
    }
}

#[test]
fn invalid_arguments_report_errors() {
    unsafe {
        let dims = [2usize, 2];
        let data = [1.0; 4];
        assert_eq!(htstep_tensor_from_dense(data.as_ptr(), dims.as_ptr(), 2, 1e-3, ptr::null_mut()), HtstepStatus::NullPointer);
        let mut t = ptr::null_mut();
        assert_eq!(htstep_tensor_from_dense(data.as_ptr(), dims.as_ptr(), 2, -1.0, &mut t), HtstepStatus::InvalidInput);
        assert!(!last_error().is_empty());
        assert_eq!(htstep_tensor_order(ptr::null()), 0);
        assert!(htstep_tensor_norm(ptr::null()).is_nan());
        htstep_tensor_free(ptr::null_mut());

        let bad = CString::new("fp3d").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(htstep_problem_preset(bad.as_ptr(), 0, &mut p), HtstepStatus::Config);
        assert!(last_error().contains("fp3d"));
        let name = CString::new("fp2d-paper").unwrap();
        assert_eq!(htstep_problem_preset(name.as_ptr(), 15, &mut p), HtstepStatus::InvalidInput);
    }
}

#[test]
fn threshold_schedule_matches_scalings() {
    let scheme = CString::new("midpoint").unwrap();
    let mut out = [0.0; 4];
    let mut len = 0;
    unsafe {
        let st = htstep_threshold_schedule(scheme.as_ptr(), 0.01, ptr::null(), 0, out.as_mut_ptr(), 4, &mut len);
        assert_eq!(st, HtstepStatus::Ok);
    }
    assert_eq!(len, 3);
    // A dt^3, B dt^2, G dt with A = B = 1e3, G = 1e2
    assert!((out[0] - 1e-3).abs() < 1e-18);
    assert!((out[1] - 1e-1).abs() < 1e-15);
    assert!((out[2] - 1.0).abs() < 1e-15);

    let euler = CString::new("euler").unwrap();
    let c = [2.0, 3.0];
    unsafe {
        let st = htstep_threshold_schedule(euler.as_ptr(), 0.1, c.as_ptr(), 2, out.as_mut_ptr(), 4, &mut len);
        assert_eq!(st, HtstepStatus::Ok);
        assert_eq!(htstep_threshold_schedule(euler.as_ptr(), 0.1, c.as_ptr(), 1, out.as_mut_ptr(), 4, &mut len), HtstepStatus::InvalidInput);
    }
    assert!((out[0] - 0.03).abs() < 1e-15 && (out[1] - 0.2).abs() < 1e-15);
}

#[test]
fn integrate_small_problem() {
    let name = CString::new("fp2d-paper").unwrap();
    let scheme = CString::new("ab2").unwrap();
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(htstep_problem_preset(name.as_ptr(), 16, &mut p), HtstepStatus::Ok);
        let (mut d, mut n) = (0, 0);
        assert_eq!(htstep_problem_shape(p, &mut d, &mut n), HtstepStatus::Ok);
        assert_eq!((d, n), (2, 16));
        let mut f0 = ptr::null_mut();
        assert_eq!(htstep_problem_initial(p, &mut f0), HtstepStatus::Ok);

        let mut f = ptr::null_mut();
        let mut stats = HtstepRunStats::default();
        let st = htstep_integrate(p, scheme.as_ptr(), 1e-3, 1e-2, ptr::null(), 0, &mut f, &mut stats);
        assert_eq!(st, HtstepStatus::Ok, "{}", last_error());
        assert_eq!(stats.steps, 10);
        assert_eq!(stats.threshold_violations, 0);
        assert!((stats.final_mass - 1.0).abs() < 1e-8, "{}", stats.final_mass);
        assert!(stats.max_rank >= 1);
        assert!(htstep_tensor_norm(f).is_finite());

        let st = htstep_integrate(p, scheme.as_ptr(), 3e-3, 1e-2, ptr::null(), 0, &mut f, &mut stats);
        assert_eq!(st, HtstepStatus::Config);
        for t in [f0, f] {
            htstep_tensor_free(t);
        }
        htstep_problem_free(p);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/htstep.h");
    let src = include_str!("../src/lib.rs");
    let names: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(names.len() > 15);
    for name in names {
        let declared = header.contains(&format!(" {name}(")) || header.contains(&format!("*{name}("));
        assert!(declared, "{name} missing from header");
    }
    assert!(header.contains("HTSTEP_STATUS_BUFFER_TOO_SMALL = 7"));
    let v = unsafe { CStr::from_ptr(htstep_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
