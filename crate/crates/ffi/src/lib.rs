//! C ABI for survkit.
//!
//! Datasets and models cross the boundary as opaque handles created by a
//! `*_new`/`*_fit`/`*_load` call and released with the matching `*_free`.
//! Every fallible call returns a [`SurvkitStatus`]; on failure a message is
//! available from [`survkit_last_error`] on the same thread. Matrices are
//! dense row-major `double` arrays and event indicators are `uint8_t` (0 or
//! nonzero).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use survkit::bench::{evaluate_model, GridConfig};
use survkit::classic::{coxph_fit, CoxConfig};
use survkit::data::{default_num_intervals, make_time_grid};
use survkit::model_file::{FittedModel, ModelFile, ModelKind};
use survkit::mtlr::{mtlr_fit, MtlrConfig};
use survkit::nmtlr::{nmtlr_fit, NmtlrConfig};
use survkit::simulate::{generate, RiskKind, SimConfig};
use survkit::{SurvError, SurvivalDataset, SurvivalModel};

use ndarray::{Array2, ArrayView2};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurvkitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    Io = 4,
    ModelFile = 5,
    FitFailed = 6,
    Panic = 7,
}

/// Survival dataset: covariates, observed times and event indicators.
pub struct SurvkitDataset(SurvivalDataset);

/// Fitted survival model.
pub struct SurvkitModel(ModelFile);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

struct Failure(SurvkitStatus, String);

impl From<SurvError> for Failure {
    fn from(e: SurvError) -> Self {
        let status = match &e {
            SurvError::Io { .. } => SurvkitStatus::Io,
            SurvError::Config(_) => SurvkitStatus::Config,
            SurvError::ModelFile(_) => SurvkitStatus::ModelFile,
            SurvError::NotConverged { .. }
            | SurvError::SingularHessian
            | SurvError::NonFiniteLoss { .. }
            | SurvError::NonFiniteActivation { .. }
            | SurvError::Calibration { .. }
            | SurvError::TooManyFailures { .. } => SurvkitStatus::FitFailed,
            _ => SurvkitStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SurvkitStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(SurvkitStatus::InvalidInput, message.into())
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SurvkitStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            SurvkitStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {message}"));
            SurvkitStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn slice_mut<'a, T>(data: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(data, len))
}

unsafe fn string<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| invalid(format!("`{what}` is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn matrix<'a>(data: *const f64, rows: usize, cols: usize) -> Result<ArrayView2<'a, f64>, Failure> {
    let len = rows.checked_mul(cols).ok_or_else(|| invalid("matrix size overflows"))?;
    let values = slice(data, len, "features")?;
    ArrayView2::from_shape((rows, cols), values).map_err(|e| invalid(e.to_string()))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn survkit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the last failed call on this thread; empty after a
/// successful call. The pointer is valid until the next survkit call on the
/// same thread.
#[no_mangle]
pub extern "C" fn survkit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Build a dataset from a row-major `n_rows x n_features` matrix, `n_rows`
/// observed times and `n_rows` event flags.
///
/// # Safety
/// Each non-null pointer must reference the stated number of readable
/// elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn survkit_dataset_new(
    features: *const f64,
    n_rows: usize,
    n_features: usize,
    times: *const f64,
    events: *const u8,
    out: *mut *mut SurvkitDataset,
) -> SurvkitStatus {
    guard(|| {
        let x = matrix(features, n_rows, n_features)?.to_owned();
        let times = slice(times, n_rows, "times")?.to_vec();
        let events = slice(events, n_rows, "events")?.iter().map(|&e| e != 0).collect();
        let names = (1..=n_features).map(|j| format!("x{j}")).collect();
        let ds = SurvivalDataset::new(x, times, events, names)?;
        write_out(out, SurvkitDataset(ds))
    })
}

/// Simulate `n` rows with the named risk (`linear`, `square`, `gaussian`)
/// and calibrated censoring.
///
/// # Safety
/// `risk` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn survkit_dataset_simulate(
    risk: *const c_char,
    n: usize,
    seed: u64,
    event_rate: f64,
    out: *mut *mut SurvkitDataset,
) -> SurvkitStatus {
    guard(|| {
        let kind: RiskKind = string(risk, "risk")?.parse().map_err(invalid)?;
        if !(event_rate > 0.0 && event_rate < 1.0) {
            return Err(invalid("event_rate must lie in (0,1)"));
        }
        let mut cfg = SimConfig::new(n, kind, seed);
        cfg.target_event_rate = event_rate;
        write_out(out, SurvkitDataset(generate(&cfg)?))
    })
}

/// # Safety
/// `dataset` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn survkit_dataset_num_rows(dataset: *const SurvkitDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `dataset` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn survkit_dataset_num_features(dataset: *const SurvkitDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.features.ncols())
}

/// Copy the dataset into caller buffers sized `rows x features`, `rows`
/// and `rows`. Any output pointer may be null to skip it.
///
/// # Safety
/// Non-null output pointers must reference enough writable elements.
#[no_mangle]
pub unsafe extern "C" fn survkit_dataset_copy(
    dataset: *const SurvkitDataset,
    features_out: *mut f64,
    times_out: *mut f64,
    events_out: *mut u8,
) -> SurvkitStatus {
    guard(|| {
        let ds = &handle(dataset, "dataset")?.0;
        if !features_out.is_null() {
            let dst = slice_mut(features_out, ds.features.len(), "features_out")?;
            for (d, s) in dst.iter_mut().zip(ds.features.iter()) {
                *d = *s;
            }
        }
        if !times_out.is_null() {
            slice_mut(times_out, ds.len(), "times_out")?.copy_from_slice(&ds.times);
        }
        if !events_out.is_null() {
            for (d, &e) in slice_mut(events_out, ds.len(), "events_out")?.iter_mut().zip(&ds.events) {
                *d = u8::from(e);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn survkit_dataset_free(dataset: *mut SurvkitDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Fit a model of kind `coxph`, `mtlr` or `nmtlr`.
///
/// `config_json` holds the model's hyperparameters as a JSON object (null
/// for defaults). `num_intervals` sets the MTLR time grid size; 0 picks it
/// from the number of events.
///
/// # Safety
/// `kind` and non-null `config_json` must be NUL-terminated strings;
/// `dataset` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn survkit_model_fit(
    kind: *const c_char,
    dataset: *const SurvkitDataset,
    config_json: *const c_char,
    num_intervals: usize,
    out: *mut *mut SurvkitModel,
) -> SurvkitStatus {
    guard(|| {
        let kind: ModelKind = string(kind, "kind")?.parse().map_err(invalid)?;
        let ds = &handle(dataset, "dataset")?.0;
        let config = if config_json.is_null() { "{}" } else { string(config_json, "config_json")? };
        let parse_err = |e: serde_json::Error| Failure(SurvkitStatus::Config, e.to_string());
        let grid = || {
            let grid_cfg = GridConfig::default();
            let k = if num_intervals == 0 { default_num_intervals(ds.num_events()) } else { num_intervals };
            make_time_grid(&ds.times, &ds.events, k, grid_cfg.strategy)
        };
        let model = match kind {
            ModelKind::Coxph => {
                let cfg: CoxConfig = serde_json::from_str(config).map_err(parse_err)?;
                FittedModel::Coxph(coxph_fit(ds, &cfg)?)
            }
            ModelKind::Mtlr => {
                let cfg: MtlrConfig = serde_json::from_str(config).map_err(parse_err)?;
                FittedModel::Mtlr(mtlr_fit(ds, &grid()?, &cfg)?)
            }
            ModelKind::Nmtlr => {
                let cfg: NmtlrConfig = serde_json::from_str(config).map_err(parse_err)?;
                FittedModel::Nmtlr(nmtlr_fit(ds, &grid()?, &cfg)?)
            }
        };
        write_out(out, SurvkitModel(ModelFile::new(model, None)))
    })
}

/// Load a model file written by `survkit train` or [`survkit_model_save`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn survkit_model_load(path: *const c_char, out: *mut *mut SurvkitModel) -> SurvkitStatus {
    guard(|| {
        let file = ModelFile::load(string(path, "path")?)?;
        write_out(out, SurvkitModel(file))
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn survkit_model_save(model: *const SurvkitModel, path: *const c_char) -> SurvkitStatus {
    guard(|| Ok(handle(model, "model")?.0.save(string(path, "path")?)?))
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn survkit_model_from_json(json: *const c_char, out: *mut *mut SurvkitModel) -> SurvkitStatus {
    guard(|| {
        let file = ModelFile::from_json(string(json, "json")?)?;
        write_out(out, SurvkitModel(file))
    })
}

/// Serialize a model to a newly allocated string, released with
/// [`survkit_string_free`]. Returns null on failure.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn survkit_model_to_json(model: *const SurvkitModel) -> *mut c_char {
    let mut text = ptr::null_mut();
    let status = guard(|| {
        let json = handle(model, "model")?.0.to_json();
        text = CString::new(json).map_err(|e| invalid(e.to_string()))?.into_raw();
        Ok(())
    });
    if status == SurvkitStatus::Ok {
        text
    } else {
        ptr::null_mut()
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn survkit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn survkit_model_num_features(model: *const SurvkitModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.model.num_features())
}

unsafe fn model_input<'a>(
    model: *const SurvkitModel,
    features: *const f64,
    n_rows: usize,
    n_features: usize,
) -> Result<(&'a FittedModel, Array2<f64>), Failure> {
    let model = &handle(model, "model")?.0.model;
    if n_features != model.num_features() {
        return Err(invalid(format!("model expects {} features, got {n_features}", model.num_features())));
    }
    let x = matrix(features, n_rows, n_features)?.to_owned();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("features must be finite"));
    }
    Ok((model, x))
}

/// Risk scores (higher means earlier expected failure) for `n_rows` rows.
///
/// # Safety
/// `features` must reference `n_rows * n_features` readable values and
/// `risks_out` `n_rows` writable values.
#[no_mangle]
pub unsafe extern "C" fn survkit_model_predict_risk(
    model: *const SurvkitModel,
    features: *const f64,
    n_rows: usize,
    n_features: usize,
    risks_out: *mut f64,
) -> SurvkitStatus {
    guard(|| {
        let (model, x) = model_input(model, features, n_rows, n_features)?;
        slice_mut(risks_out, n_rows, "risks_out")?.copy_from_slice(&model.risks(&x));
        Ok(())
    })
}

/// Survival probabilities at `n_times` times, written row-major as
/// `n_rows x n_times`.
///
/// # Safety
/// Pointers must reference the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn survkit_model_predict_survival(
    model: *const SurvkitModel,
    features: *const f64,
    n_rows: usize,
    n_features: usize,
    times: *const f64,
    n_times: usize,
    survival_out: *mut f64,
) -> SurvkitStatus {
    guard(|| {
        let (model, x) = model_input(model, features, n_rows, n_features)?;
        let times = slice(times, n_times, "times")?;
        let len = n_rows.checked_mul(n_times).ok_or_else(|| invalid("output size overflows"))?;
        let out = slice_mut(survival_out, len, "survival_out")?;
        let surv = model.survival_matrix(&x, times);
        for (d, s) in out.iter_mut().zip(surv.iter()) {
            *d = *s;
        }
        Ok(())
    })
}

/// C-index and integrated Brier score of `model` on `test`; censoring
/// weights come from `train`. The Brier grid has `points` times.
///
/// # Safety
/// Handles must be live; `c_index_out` and `ibs_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn survkit_model_evaluate(
    model: *const SurvkitModel,
    test: *const SurvkitDataset,
    train: *const SurvkitDataset,
    points: usize,
    c_index_out: *mut f64,
    ibs_out: *mut f64,
) -> SurvkitStatus {
    guard(|| {
        let model = &handle(model, "model")?.0.model;
        let test = &handle(test, "test")?.0;
        let train = &handle(train, "train")?.0;
        if test.features.ncols() != model.num_features() {
            return Err(invalid(format!("model expects {} features, got {}", model.num_features(), test.features.ncols())));
        }
        if c_index_out.is_null() || ibs_out.is_null() {
            return Err(null("output"));
        }
        let eval = evaluate_model(model, test, train, points)?;
        *c_index_out = eval.c_index;
        *ibs_out = eval.ibs;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn survkit_model_free(model: *mut SurvkitModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Concordance index of `risks` against observed `times` and `events`.
///
/// # Safety
/// Input pointers must reference `n` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn survkit_c_index(
    times: *const f64,
    events: *const u8,
    risks: *const f64,
    n: usize,
    out: *mut f64,
) -> SurvkitStatus {
    guard(|| {
        let times = slice(times, n, "times")?;
        let events: Vec<bool> = slice(events, n, "events")?.iter().map(|&e| e != 0).collect();
        let risks = slice(risks, n, "risks")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = survkit::metrics::c_index(times, &events, risks)?;
        Ok(())
    })
}
