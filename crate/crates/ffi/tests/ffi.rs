use std::ffi::{CStr, CString};
use std::ptr;

use lagcoh_ffi::*;

fn series_from(values: &[f64], shape: (usize, usize, usize)) -> *mut LchSeries {
    let mut s = ptr::null_mut();
    let status = unsafe { lch_series_from_buffer(values.as_ptr(), shape.0, shape.1, shape.2, &mut s) };
    assert_eq!(status, LchStatus::Ok);
    s
}

fn last_error() -> String {
    let p = lch_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

// y(t) = x(t - 1) + small noise from a fixed linear congruential sequence
fn lagged_pair(n_epochs: usize, n_samples: usize) -> Vec<f64> {
    let mut state = 12345u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let mut out = Vec::with_capacity(n_epochs * n_samples * 2);
    for _ in 0..n_epochs {
        let x: Vec<f64> = (0..=n_samples).map(|_| next()).collect();
        for t in 0..n_samples {
            out.push(x[t + 1]);
            out.push(x[t] + 0.3 * next());
        }
    }
    out
}

#[test]
fn compute_and_read_rows() {
    let data = lagged_pair(40, 16);
    let s = series_from(&data, (40, 16, 2));
    let (mut e, mut t, mut c) = (0, 0, 0);
    assert_eq!(unsafe { lch_series_shape(s, &mut e, &mut t, &mut c) }, LchStatus::Ok);
    assert_eq!((e, t, c), (40, 16, 2));

    let cfg = CString::new(r#"{"x_channels": [0], "y_channels": [1], "frequencies": [0, 4], "tests": ["lrt"]}"#).unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { lch_compute(s, cfg.as_ptr(), &mut r) }, LchStatus::Ok);
    assert_eq!(unsafe { lch_result_len(r) }, 2);

    let label = unsafe { CStr::from_ptr(lch_result_label(r, 1)) };
    assert_eq!(label.to_str().unwrap(), "f4");
    assert!(unsafe { lch_result_label(r, 2) }.is_null());

    let mut row = LchRow {
        lag_a: 0.0,
        lag_c: 0.0,
        lag_b: 0.0,
        statistic: 0.0,
        p_value: 0.0,
        df1: 0,
        n_frequencies: 0,
        degenerate: false,
    };
    assert_eq!(unsafe { lch_result_row(r, 0, &mut row) }, LchStatus::Ok);
    assert!(row.degenerate);
    assert_eq!((row.lag_a, row.p_value), (0.0, 1.0));

    // a one-sample delay is a quarter cycle at frequency 4 of 16
    assert_eq!(unsafe { lch_result_row(r, 1, &mut row) }, LchStatus::Ok);
    assert!(!row.degenerate);
    assert!(row.lag_c > 0.5 && row.lag_c < 1.0, "{row:?}");
    assert!((row.lag_c - (-(-row.lag_a).exp_m1())).abs() < 1e-12);
    assert_eq!(row.df1, 1);
    assert!(row.p_value < 1e-6);

    assert_eq!(unsafe { lch_result_row(r, 5, &mut row) }, LchStatus::InvalidArgument);
    assert!(last_error().contains("out of range"));

    let mut text = ptr::null_mut();
    assert_eq!(unsafe { lch_result_emit(r, LchEmit::Json, &mut text) }, LchStatus::Ok);
    let json: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(text) }.to_str().unwrap()).unwrap();
    assert_eq!(json["results"][1]["lagC"].as_f64().unwrap(), row.lag_c);
    unsafe { lch_string_free(text) };

    assert_eq!(unsafe { lch_result_emit(r, LchEmit::Csv, &mut text) }, LchStatus::Ok);
    let csv = unsafe { CStr::from_ptr(text) }.to_str().unwrap().to_owned();
    assert!(csv.starts_with("label,p,q,lagA"));
    assert_eq!(csv.lines().count(), 3);
    unsafe {
        lch_string_free(text);
        lch_result_free(r);
        lch_series_free(s);
    }
}

#[test]
fn error_codes() {
    let data = lagged_pair(5, 8);
    let s = series_from(&data, (5, 8, 2));
    let mut r = ptr::null_mut();

    let bad = CString::new(r#"{"x_channels": [0], "y_channels": [0]}"#).unwrap();
    assert_eq!(unsafe { lch_compute(s, bad.as_ptr(), &mut r) }, LchStatus::ConfigError);
    assert!(last_error().contains("both"));
    assert!(r.is_null());

    assert_eq!(unsafe { lch_compute(s, ptr::null(), &mut r) }, LchStatus::NullPointer);
    assert_eq!(unsafe { lch_compute(ptr::null(), bad.as_ptr(), &mut r) }, LchStatus::NullPointer);

    let mut other = ptr::null_mut();
    let status = unsafe { lch_series_from_buffer(data.as_ptr(), 5, 1, 2, &mut other) };
    assert_eq!(status, LchStatus::DataError);

    let path = CString::new("/nonexistent/epochs.csv").unwrap();
    assert_eq!(unsafe { lch_series_load(path.as_ptr(), LchFormat::CsvLong, &mut other) }, LchStatus::DataError);

    let mut m = LchMeasures {
        lag_a: 0.0,
        lag_c: 0.0,
        lag_b: 0.0,
    };
    assert_eq!(unsafe { lch_bivariate(1.0, 1.0, 0.9, 0.9, &mut m) }, LchStatus::NumericalError);
    assert_eq!(unsafe { lch_bivariate(1.0, 1.0, 0.0, 0.5, &mut m) }, LchStatus::Ok);
    // lagC = 0.25 / (1 − 0) and lagB = lagC²
    assert!((m.lag_c - 0.25).abs() < 1e-15 && (m.lag_b - 0.0625).abs() < 1e-15);

    unsafe {
        lch_series_free(s);
        lch_series_free(ptr::null_mut());
        lch_result_free(ptr::null_mut());
    }
}

#[test]
fn load_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("epochs.csv");
    std::fs::write(&path, "epoch,sample,a,b\n0,0,1,2\n0,1,3,4\n1,0,5,6\n1,1,7,9\n").unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { lch_series_load(c_path.as_ptr(), LchFormat::CsvLong, &mut s) }, LchStatus::Ok);
    let (mut e, mut t, mut c) = (0, 0, 0);
    unsafe { lch_series_shape(s, &mut e, &mut t, &mut c) };
    assert_eq!((e, t, c), (2, 2, 2));
    unsafe { lch_series_free(s) };
}

#[test]
fn header_is_generated() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/lagcoh.h")).unwrap();
    for name in [
        "lch_series_load",
        "lch_series_from_buffer",
        "lch_compute",
        "lch_result_row",
        "lch_result_emit",
        "lch_string_free",
        "lch_last_error_message",
        "typedef struct LchSeries LchSeries",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
