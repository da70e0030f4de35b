//! C ABI over the gasfc toolkit.
//!
//! Every fallible function returns a [`GasfcStatus`]; on failure the
//! message is available from [`gasfc_last_error_message`] on the same
//! thread. Models are opaque handles released with [`gasfc_model_free`],
//! strings returned by the library are released with [`gasfc_string_free`].
//! Matrices are row-major `n x p` arrays of doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use gasfc::calendar::{self, CivilDate};
use gasfc::features;
use gasfc::models::{ForecasterSpec, TrainedForecaster};
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GasfcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Runtime = 3,
    Panic = 4,
}

/// Proleptic Gregorian calendar date.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GasfcDate {
    pub year: i32,
    pub month: u32,
    pub day: u32,
}

/// Fitted forecaster.
pub struct GasfcModel {
    inner: TrainedForecaster,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(GasfcStatus, String);

impl From<gasfc::Error> for Failure {
    fn from(e: gasfc::Error) -> Self {
        let status = match e {
            gasfc::Error::InvalidParameter(_)
            | gasfc::Error::InvalidDate(_)
            | gasfc::Error::YearOutOfRange(_)
            | gasfc::Error::ColumnMismatch { .. }
            | gasfc::Error::LengthMismatch { .. }
            | gasfc::Error::Json(_)
            | gasfc::Error::FormatVersion(_) => GasfcStatus::InvalidArgument,
            _ => GasfcStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(GasfcStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GasfcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GasfcStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GasfcStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(GasfcStatus::NullPointer, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    non_null(p, name)?;
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("`{name}` is not UTF-8")))
}

fn to_civil(d: GasfcDate) -> Result<CivilDate, Failure> {
    Ok(CivilDate::new(d.year, d.month, d.day)?)
}

fn from_civil(d: CivilDate) -> GasfcDate {
    GasfcDate { year: d.year(), month: d.month(), day: d.day() }
}

unsafe fn matrix(x: *const f64, n: usize, p: usize) -> Result<DMatrix<f64>, Failure> {
    non_null(x, "x")?;
    let len = n.checked_mul(p).ok_or_else(|| invalid("n * p overflows"))?;
    Ok(DMatrix::from_row_slice(n, p, slice::from_raw_parts(x, len)))
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gasfc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gasfc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Easter Sunday of `year` (1583..=4099).
///
/// # Safety
/// `out` must be a valid pointer to writable memory.
#[no_mangle]
pub unsafe extern "C" fn gasfc_easter(year: i32, out: *mut GasfcDate) -> GasfcStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = from_civil(calendar::easter_date(year)?);
        Ok(())
    })
}

/// Similar day of `date` in the previous year.
///
/// # Safety
/// `out` must be a valid pointer to writable memory.
#[no_mangle]
pub unsafe extern "C" fn gasfc_similar_day(date: GasfcDate, out: *mut GasfcDate) -> GasfcStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = from_civil(calendar::similar_day(to_civil(date)?)?);
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer to writable memory.
#[no_mangle]
pub unsafe extern "C" fn gasfc_is_holiday(date: GasfcDate, out: *mut bool) -> GasfcStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = calendar::is_holiday(to_civil(date)?);
        Ok(())
    })
}

/// Heating degree days `max(18 - t, 0)`.
#[no_mangle]
pub extern "C" fn gasfc_hdd(temperature_c: f64) -> f64 {
    features::hdd(temperature_c)
}

/// Heating and cooling degree days `|16 - t|`.
#[no_mangle]
pub extern "C" fn gasfc_hcdd(temperature_c: f64) -> f64 {
    features::hcdd(temperature_c)
}

/// Mean absolute error of two length-`n` arrays.
///
/// # Safety
/// `y` and `yhat` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gasfc_mae(y: *const f64, yhat: *const f64, n: usize, out: *mut f64) -> GasfcStatus {
    guard(|| {
        non_null(y, "y")?;
        non_null(yhat, "yhat")?;
        non_null(out, "out")?;
        *out = gasfc::backtest::mae(slice::from_raw_parts(y, n), slice::from_raw_parts(yhat, n))?;
        Ok(())
    })
}

/// Fits the model described by `spec_json` (for example
/// `{"model":"ridge","lambda":1.0}`) on row-major `x` and `y`.
/// `scaled` marks the columns to standardize; null standardizes all.
///
/// # Safety
/// `x` must point to `n * p` doubles, `y` to `n`, `scaled` (if not null)
/// to `p` bools; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gasfc_model_fit(
    spec_json: *const c_char,
    x: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    scaled: *const bool,
    out: *mut *mut GasfcModel,
) -> GasfcStatus {
    guard(|| {
        non_null(out, "out")?;
        let spec: ForecasterSpec = serde_json::from_str(read_str(spec_json, "spec_json")?).map_err(gasfc::Error::from)?;
        let xm = matrix(x, n, p)?;
        non_null(y, "y")?;
        let yv = DVector::from_column_slice(slice::from_raw_parts(y, n));
        let mask = if scaled.is_null() { vec![true; p] } else { slice::from_raw_parts(scaled, p).to_vec() };
        let inner = TrainedForecaster::fit(&spec, &xm, &yv, &mask)?;
        *out = Box::into_raw(Box::new(GasfcModel { inner }));
        Ok(())
    })
}

/// Forecasts for `n` rows of `x` into `out` (length `n`).
///
/// # Safety
/// `model` must come from this library; `x` must point to `n * p`
/// doubles and `out` to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gasfc_model_predict(
    model: *const GasfcModel,
    x: *const f64,
    n: usize,
    p: usize,
    out: *mut f64,
) -> GasfcStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let pred = (*model).inner.predict(&matrix(x, n, p)?)?;
        slice::from_raw_parts_mut(out, n).copy_from_slice(pred.as_slice());
        Ok(())
    })
}

/// Number of input columns the model expects.
///
/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gasfc_model_n_features(model: *const GasfcModel, out: *mut usize) -> GasfcStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        *out = (*model).inner.n_features();
        Ok(())
    })
}

/// Serializes the model; free the string with [`gasfc_string_free`].
///
/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gasfc_model_to_json(model: *const GasfcModel, out: *mut *mut c_char) -> GasfcStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let json = (*model).inner.to_json()?;
        *out = CString::new(json).map_err(|_| invalid("model JSON contains NUL"))?.into_raw();
        Ok(())
    })
}

/// Restores a model written by [`gasfc_model_to_json`].
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gasfc_model_from_json(json: *const c_char, out: *mut *mut GasfcModel) -> GasfcStatus {
    guard(|| {
        non_null(out, "out")?;
        let inner = TrainedForecaster::from_json(read_str(json, "json")?)?;
        *out = Box::into_raw(Box::new(GasfcModel { inner }));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn gasfc_model_free(model: *mut GasfcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn gasfc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs a backtest from a JSON config file, writing outputs to `out_dir`
/// (null uses the config's `out_dir`) with `jobs` worker threads.
///
/// # Safety
/// `config_path` and `out_dir` (if not null) must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gasfc_backtest_run(config_path: *const c_char, out_dir: *const c_char, jobs: usize) -> GasfcStatus {
    guard(|| {
        let config = read_str(config_path, "config_path")?;
        let jobs = jobs.to_string();
        let mut args = vec!["gasfc", "backtest", "--config", config, "--jobs", &jobs];
        if !out_dir.is_null() {
            args.extend(["--out", read_str(out_dir, "out_dir")?]);
        }
        let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
        match gasfc::cli::run(args, &mut stdout, &mut stderr) {
            gasfc::cli::EXIT_OK => Ok(()),
            code => {
                let msg = String::from_utf8_lossy(&stderr).trim().to_string();
                let status = if code == gasfc::cli::EXIT_USAGE { GasfcStatus::InvalidArgument } else { GasfcStatus::Runtime };
                Err(Failure(status, msg))
            }
        }
    })
}
