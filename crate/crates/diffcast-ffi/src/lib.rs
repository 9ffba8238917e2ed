//! C interface over the forecasting pipeline.
//!
//! Every fallible call returns a [`DcStatus`]; on failure the message is
//! kept per thread and readable through [`dc_last_error`]. Models travel as
//! opaque [`DcModel`] handles owned by the caller and released with
//! [`dc_model_close`]. Strings returned through out-parameters are released
//! with `dc_string_free`; strings returned as plain pointers are borrowed
//! and must not be freed.
//!
//! Panics never unwind across the boundary; they surface as
//! [`DcStatus::Panic`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use diffcast::metrics;
use diffcast::pipeline::{
    run_calibrate, run_evaluate, run_forecast, run_train, synth_generate, Arm, Dataset,
    ModelBundle, RunConfig,
};
use diffcast::Error;

/// Status of a call. Nonzero values mirror the CLI exit codes where one
/// exists; the remaining values are argument and runtime faults specific to
/// the C boundary.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DcStatus {
    /// Success.
    Ok = 0,
    /// Invalid configuration, arguments or hyperparameters.
    Config = 1,
    /// Unreadable, malformed or insufficient data.
    Data = 2,
    /// Non-finite values where finite ones are required.
    Numeric = 3,
    /// A required pointer argument was null.
    NullArg = 4,
    /// A string argument was not valid UTF-8.
    Utf8 = 5,
    /// The call panicked; treat the handle as poisoned.
    Panic = 6,
}

/// Opaque handle over a trained model bundle.
pub struct DcModel {
    bundle: ModelBundle,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

type CallResult = Result<(), (DcStatus, String)>;

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
}

fn status_of(err: &Error) -> DcStatus {
    match err {
        Error::Config(_) => DcStatus::Config,
        Error::Data(_) => DcStatus::Data,
        Error::Numeric(_) => DcStatus::Numeric,
    }
}

fn lift(err: Error) -> (DcStatus, String) {
    (status_of(&err), err.to_string())
}

/// Runs `body`, converts its error into a status and stores the message.
fn guarded(body: impl FnOnce() -> CallResult) -> DcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(cause) => {
            let msg = cause
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| cause.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic of unknown type".into());
            set_error(&format!("panic: {msg}"));
            DcStatus::Panic
        }
    }
}

/// Borrows a required C string argument.
///
/// # Safety
/// `ptr` must be null or point at a NUL-terminated string.
unsafe fn req_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, (DcStatus, String)> {
    if ptr.is_null() {
        return Err((DcStatus::NullArg, format!("{name} must not be null")));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| (DcStatus::Utf8, format!("{name} is not valid UTF-8")))
}

/// Borrows an optional C string argument.
///
/// # Safety
/// Same contract as [`req_str`].
unsafe fn opt_str<'a>(
    ptr: *const c_char,
    name: &str,
) -> Result<Option<&'a str>, (DcStatus, String)> {
    if ptr.is_null() {
        return Ok(None);
    }
    unsafe { req_str(ptr, name) }.map(Some)
}

fn req_out<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, (DcStatus, String)> {
    if ptr.is_null() {
        return Err((DcStatus::NullArg, format!("{name} must not be null")));
    }
    Ok(unsafe { &mut *ptr })
}

fn req_model<'a>(ptr: *const DcModel) -> Result<&'a DcModel, (DcStatus, String)> {
    if ptr.is_null() {
        return Err((DcStatus::NullArg, "model must not be null".into()));
    }
    Ok(unsafe { &*ptr })
}

/// Library version as a static NUL-terminated string; never freed.
#[no_mangle]
pub extern "C" fn dc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failing call on this thread, empty until one fails.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Frees a string returned through an out-parameter. Null is a no-op.
///
/// # Safety
/// `ptr` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn dc_string_free(ptr: *mut c_char) {
    if !ptr.is_null() {
        drop(unsafe { CString::from_raw(ptr) });
    }
}

/// Writes a synthetic benchmark series as CSV. `kind` is one of `ar1`,
/// `sinusoid_noise`, `random_walk` or `heteroscedastic`; `params` is an
/// optional comma-separated `key=value` list (null for defaults).
///
/// # Safety
/// All pointer arguments must be null or NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn dc_synth_csv(
    kind: *const c_char,
    rows: usize,
    variates: usize,
    seed: u64,
    params: *const c_char,
    out_path: *const c_char,
) -> DcStatus {
    guarded(|| {
        let kind = unsafe { req_str(kind, "kind") }?.parse().map_err(lift)?;
        let out_path = unsafe { req_str(out_path, "out_path") }?;
        let mut map = BTreeMap::new();
        if let Some(list) = unsafe { opt_str(params, "params") }? {
            for item in list.split(',').filter(|s| !s.trim().is_empty()) {
                let (k, v) = item.split_once('=').ok_or_else(|| {
                    (
                        DcStatus::Config,
                        format!("expected key=value in params, got '{item}'"),
                    )
                })?;
                let value: f64 = v.trim().parse().map_err(|_| {
                    (
                        DcStatus::Config,
                        format!("parameter {} needs a numeric value", k.trim()),
                    )
                })?;
                map.insert(k.trim().to_string(), value);
            }
        }
        let data = synth_generate(kind, rows, variates, seed, &map).map_err(lift)?;
        data.write_csv(Path::new(out_path)).map_err(lift)
    })
}

/// Trains a model and writes the bundle to `bundle_out`. `config_text` holds
/// the same `key = value` lines as a CLI config file (null for defaults);
/// `data_path`, when non-null, overrides the configured `data.path`.
///
/// # Safety
/// All pointer arguments must be null or NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn dc_train(
    config_text: *const c_char,
    data_path: *const c_char,
    bundle_out: *const c_char,
) -> DcStatus {
    guarded(|| {
        let bundle_out = unsafe { req_str(bundle_out, "bundle_out") }?;
        let mut cfg = match unsafe { opt_str(config_text, "config_text") }? {
            Some(text) => RunConfig::parse(text).map_err(lift)?,
            None => RunConfig::default(),
        };
        if let Some(path) = unsafe { opt_str(data_path, "data_path") }? {
            cfg.data_path = Some(path.to_string());
        }
        let bundle = run_train(&cfg).map_err(lift)?;
        bundle.save(Path::new(bundle_out)).map_err(lift)
    })
}

/// Loads a trained bundle from disk into a fresh handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must point at writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_model_open(path: *const c_char, out: *mut *mut DcModel) -> DcStatus {
    guarded(|| {
        let out = req_out(out, "out")?;
        let path = unsafe { req_str(path, "path") }?;
        let bundle = ModelBundle::load(Path::new(path)).map_err(lift)?;
        *out = Box::into_raw(Box::new(DcModel { bundle }));
        Ok(())
    })
}

/// Releases a model handle. Null is a no-op.
///
/// # Safety
/// `model` must come from `dc_model_open` and not have been closed already.
#[no_mangle]
pub unsafe extern "C" fn dc_model_close(model: *mut DcModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Writes the bundle behind `model` to `path`.
///
/// # Safety
/// `model` must be a live handle; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dc_model_save(model: *const DcModel, path: *const c_char) -> DcStatus {
    guarded(|| {
        let model = req_model(model)?;
        let path = unsafe { req_str(path, "path") }?;
        model.bundle.save(Path::new(path)).map_err(lift)
    })
}

/// Number of past steps the model conditions on.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dc_model_history(model: *const DcModel, out: *mut usize) -> DcStatus {
    guarded(|| {
        let model = req_model(model)?;
        *req_out(out, "out")? = model.bundle.dims.history;
        Ok(())
    })
}

/// Number of future steps each forecast covers.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dc_model_horizon(model: *const DcModel, out: *mut usize) -> DcStatus {
    guarded(|| {
        let model = req_model(model)?;
        *req_out(out, "out")? = model.bundle.dims.horizon;
        Ok(())
    })
}

/// Number of series the model was trained on.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dc_model_variates(model: *const DcModel, out: *mut usize) -> DcStatus {
    guarded(|| {
        let model = req_model(model)?;
        *req_out(out, "out")? = model.bundle.dims.variates;
        Ok(())
    })
}

/// Whether coverage multipliers have been fitted (1) or not (0).
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dc_model_is_calibrated(
    model: *const DcModel,
    out: *mut c_int,
) -> DcStatus {
    guarded(|| {
        let model = req_model(model)?;
        *req_out(out, "out")? = model.bundle.calibration.is_some() as c_int;
        Ok(())
    })
}

/// Fits coverage multipliers on the validation split of the CSV at
/// `data_path` and stores them in the handle. Persist with
/// `dc_model_save`.
///
/// # Safety
/// `model` must be a live handle with no other outstanding borrow;
/// `data_path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dc_calibrate(model: *mut DcModel, data_path: *const c_char) -> DcStatus {
    guarded(|| {
        if model.is_null() {
            return Err((DcStatus::NullArg, "model must not be null".into()));
        }
        let model = unsafe { &mut *model };
        let path = unsafe { req_str(data_path, "data_path") }?;
        let data = Dataset::load_csv(Path::new(path)).map_err(lift)?;
        run_calibrate(&mut model.bundle, &data).map_err(lift)?;
        Ok(())
    })
}

/// Scores the model on the test split of the CSV at `data_path` and returns
/// the report as JSON through `out_json` (free with `dc_string_free`).
/// `arms` is a comma-separated arm list, or null/`all` for every arm the
/// bundle supports; nonzero `trajectory` adds per-jump ensemble scores.
///
/// # Safety
/// `model` must be a live handle; string arguments must be null or
/// NUL-terminated; `out_json` must point at writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_evaluate_json(
    model: *const DcModel,
    data_path: *const c_char,
    arms: *const c_char,
    trajectory: c_int,
    out_json: *mut *mut c_char,
) -> DcStatus {
    guarded(|| {
        let out_json = req_out(out_json, "out_json")?;
        let model = req_model(model)?;
        let path = unsafe { req_str(data_path, "data_path") }?;
        let arm_list = match unsafe { opt_str(arms, "arms") }? {
            None | Some("all") => Arm::defaults(model.bundle.calibration.is_some()),
            Some(list) => list
                .split(',')
                .map(|t| t.trim().parse::<Arm>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(lift)?,
        };
        let data = Dataset::load_csv(Path::new(path)).map_err(lift)?;
        let report =
            run_evaluate(&model.bundle, &data, &arm_list, trajectory != 0).map_err(lift)?;
        let text = serde_json::to_string(&report)
            .map_err(|e| (DcStatus::Data, format!("cannot serialize report: {e}")))?;
        let text = CString::new(text)
            .map_err(|_| (DcStatus::Data, "report contains a NUL byte".into()))?;
        *out_json = text.into_raw();
        Ok(())
    })
}

/// Writes forecast ensembles for the test split of the CSV at `data_path`:
/// one CSV of ensemble members and one of per-cell summary statistics.
///
/// # Safety
/// `model` must be a live handle; all strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dc_forecast_csv(
    model: *const DcModel,
    data_path: *const c_char,
    members_out: *const c_char,
    summary_out: *const c_char,
) -> DcStatus {
    guarded(|| {
        let model = req_model(model)?;
        let path = unsafe { req_str(data_path, "data_path") }?;
        let members_out = unsafe { req_str(members_out, "members_out") }?;
        let summary_out = unsafe { req_str(summary_out, "summary_out") }?;
        let data = Dataset::load_csv(Path::new(path)).map_err(lift)?;
        let out = run_forecast(&model.bundle, &data).map_err(lift)?;
        let write = |p: &str, text: &str| {
            std::fs::write(p, text).map_err(|e| (DcStatus::Data, format!("{p}: {e}")))
        };
        write(members_out, &out.samples_csv)?;
        write(summary_out, &out.summary_csv)
    })
}

/// Continuous ranked probability score of an ensemble against one observed
/// value. All inputs must be finite and `len` must be positive.
///
/// # Safety
/// `samples` must point at `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dc_crps_empirical(
    samples: *const c_double,
    len: usize,
    observed: c_double,
    out: *mut c_double,
) -> DcStatus {
    guarded(|| {
        let out = req_out(out, "out")?;
        if samples.is_null() {
            return Err((DcStatus::NullArg, "samples must not be null".into()));
        }
        if len == 0 {
            return Err((DcStatus::Config, "len must be positive".into()));
        }
        let samples = unsafe { std::slice::from_raw_parts(samples, len) };
        if samples.iter().any(|x| !x.is_finite()) || !observed.is_finite() {
            return Err((DcStatus::Numeric, "CRPS inputs must be finite".into()));
        }
        *out = metrics::crps_empirical(samples, observed);
        Ok(())
    })
}

/// Closed-form continuous ranked probability score of a normal forecast
/// with the given mean and spread against one observed value.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dc_crps_gaussian(
    mean: c_double,
    spread: c_double,
    observed: c_double,
    out: *mut c_double,
) -> DcStatus {
    guarded(|| {
        let out = req_out(out, "out")?;
        if !(mean.is_finite() && spread.is_finite() && observed.is_finite()) || spread <= 0.0 {
            return Err((
                DcStatus::Numeric,
                "need finite inputs and positive spread".into(),
            ));
        }
        *out = metrics::crps_gaussian(mean, spread, observed);
        Ok(())
    })
}
