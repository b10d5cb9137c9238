//! C interface to `lagcoh`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free` function. Every fallible call returns an
//! [`LchStatus`]; on failure a message is available from
//! [`lch_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lagcoh::cli_io::{emit_results, load_epochs, run_pipeline, AnalysisConfig, DataFormat, EmitFormat, ResultDocument};
use lagcoh::measures::bivariate_lagged;
use lagcoh::num_complex::Complex64;
use lagcoh::{Error, ErrorClass, EpochedTimeSeries};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LchStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    DataError = 4,
    NumericalError = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LchFormat {
    CsvLong = 0,
    RawF64 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LchEmit {
    Json = 0,
    Csv = 1,
}

/// Lagged measures for one frequency or band. Measures that were not
/// requested are NaN; `statistic`, `p_value` and `df1` describe the first
/// requested test and are NaN/0 when there is none.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LchRow {
    pub lag_a: f64,
    pub lag_c: f64,
    pub lag_b: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub df1: usize,
    pub n_frequencies: usize,
    pub degenerate: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LchMeasures {
    pub lag_a: f64,
    pub lag_c: f64,
    pub lag_b: f64,
}

/// Epoched recording, `[epoch][sample][channel]`.
pub struct LchSeries {
    inner: EpochedTimeSeries,
}

/// Output of [`lch_compute`].
pub struct LchResult {
    doc: ResultDocument,
    labels: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(LchStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.class() {
            ErrorClass::Config => LchStatus::ConfigError,
            ErrorClass::Data => LchStatus::DataError,
            ErrorClass::Numerical => LchStatus::NumericalError,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LchStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LchStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            LchStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(LchStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(LchStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lch_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Read an epoch file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lch_series_load(path: *const c_char, format: LchFormat, out: *mut *mut LchSeries) -> LchStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = c_str(path, "path")?;
        let format = match format {
            LchFormat::CsvLong => DataFormat::CsvLong,
            LchFormat::RawF64 => DataFormat::RawF64,
        };
        let inner = load_epochs(path, format)?;
        *out = Box::into_raw(Box::new(LchSeries { inner }));
        Ok(())
    })
}

/// Copy `n_epochs·n_samples·n_channels` doubles in `[epoch][sample][channel]`
/// order into a new series with channel labels `ch0, ch1, ...`.
///
/// # Safety
/// `data` must point to that many readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lch_series_from_buffer(
    data: *const f64,
    n_epochs: usize,
    n_samples: usize,
    n_channels: usize,
    out: *mut *mut LchSeries,
) -> LchStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if data.is_null() {
            return Err(null("data"));
        }
        let len = n_epochs
            .checked_mul(n_samples)
            .and_then(|v| v.checked_mul(n_channels))
            .ok_or_else(|| Failure(LchStatus::InvalidArgument, "shape overflows".into()))?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        let inner = EpochedTimeSeries::from_flat(values, (n_epochs, n_samples, n_channels))?;
        *out = Box::into_raw(Box::new(LchSeries { inner }));
        Ok(())
    })
}

/// # Safety
/// `series` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lch_series_free(series: *mut LchSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// # Safety
/// `series` must be a live handle; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn lch_series_shape(
    series: *const LchSeries,
    n_epochs: *mut usize,
    n_samples: *mut usize,
    n_channels: *mut usize,
) -> LchStatus {
    guard(|| {
        let s = series.as_ref().ok_or_else(|| null("series"))?;
        if n_epochs.is_null() || n_samples.is_null() || n_channels.is_null() {
            return Err(null("shape output"));
        }
        *n_epochs = s.inner.n_epochs();
        *n_samples = s.inner.n_samples();
        *n_channels = s.inner.n_channels();
        Ok(())
    })
}

/// Run the analysis described by a JSON configuration document.
///
/// # Safety
/// `series` must be a live handle, `config_json` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lch_compute(
    series: *const LchSeries,
    config_json: *const c_char,
    out: *mut *mut LchResult,
) -> LchStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = series.as_ref().ok_or_else(|| null("series"))?;
        let cfg = AnalysisConfig::from_json(c_str(config_json, "config_json")?)?;
        let doc = run_pipeline(&s.inner, &cfg)?;
        let labels = doc
            .results
            .iter()
            .map(|r| CString::new(r.label.replace('\0', " ")).unwrap_or_default())
            .collect();
        *out = Box::into_raw(Box::new(LchResult { doc, labels }));
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lch_result_free(result: *mut LchResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of frequencies and bands in the result; 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lch_result_len(result: *const LchResult) -> usize {
    result.as_ref().map_or(0, |r| r.doc.results.len())
}

/// Label of row `index` (`f<k>` or the band name), owned by the handle.
/// Null if the handle is null or the index is out of range.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lch_result_label(result: *const LchResult, index: usize) -> *const c_char {
    result
        .as_ref()
        .and_then(|r| r.labels.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lch_result_row(result: *const LchResult, index: usize, out: *mut LchRow) -> LchStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let e = r.doc.results.get(index).ok_or_else(|| {
            Failure(
                LchStatus::InvalidArgument,
                format!("row {index} out of range ({} rows)", r.doc.results.len()),
            )
        })?;
        let test = e.tests.first();
        *out = LchRow {
            lag_a: e.lag_a.unwrap_or(f64::NAN),
            lag_c: e.lag_c.unwrap_or(f64::NAN),
            lag_b: e.lag_b.unwrap_or(f64::NAN),
            statistic: test.map_or(f64::NAN, |t| t.statistic),
            p_value: test.map_or(f64::NAN, |t| t.p_value),
            df1: test.map_or(0, |t| t.df1),
            n_frequencies: e.frequencies.len(),
            degenerate: e.degenerate,
        };
        Ok(())
    })
}

/// Serialize the result. The string must be released with
/// [`lch_string_free`].
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lch_result_emit(result: *const LchResult, format: LchEmit, out: *mut *mut c_char) -> LchStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let format = match format {
            LchEmit::Json => EmitFormat::Json,
            LchEmit::Csv => EmitFormat::Csv,
        };
        let text = emit_results(&r.doc, format)?;
        let text = CString::new(text).map_err(|e| Failure(LchStatus::DataError, e.to_string()))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lch_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Lagged measures of one univariate pair from its auto- and cross-spectra.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lch_bivariate(
    sxx: f64,
    syy: f64,
    sxy_re: f64,
    sxy_im: f64,
    out: *mut LchMeasures,
) -> LchStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let r = bivariate_lagged(sxx, syy, Complex64::new(sxy_re, sxy_im))?;
        *out = LchMeasures {
            lag_a: r.lag_a,
            lag_c: r.lag_c,
            lag_b: r.lag_b,
        };
        Ok(())
    })
}
