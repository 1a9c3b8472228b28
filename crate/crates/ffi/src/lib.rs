//! C ABI over the `cpalign` library.
//!
//! Every fallible call returns a [`CpaStatus`]; on failure the message is
//! available from [`cpa_last_error_message`] on the same thread. Configs,
//! scenarios and reports are opaque handles released with the matching
//! `*_free`. Strings handed out by the library are released
//! with [`cpa_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use cpalign::sim::{count_similarity_ops, generate_scenario, Pipeline, RunOptions, RunReport, Scenario, SimConfig, SimilarityMode};
use cpalign::temporal::{temporal_loss, warp_features, CosineGranularity};
use cpalign::{Error, Tensor3};

/// Result codes shared by every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CpaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Shape = 4,
    OutOfRange = 5,
    Archive = 6,
    Io = 7,
    Degenerate = 8,
    Panic = 9,
}

/// Similarity accounting mode for [`cpa_count_similarity_ops`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CpaSimilarityMode {
    Global = 0,
    Blockwise = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CpaOpCounts {
    pub mul: u64,
    pub add: u64,
    pub sqrt: u64,
    pub div: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CpaDetectionSummary {
    pub ap50: f64,
    pub ap70: f64,
    pub mean_iou: f64,
    pub ground_truth: u64,
    pub detections: u64,
}

/// Simulation configuration.
pub struct CpaConfig(SimConfig);

/// Generated scenario.
pub struct CpaScenario(Scenario);

/// Report of one pipeline run.
pub struct CpaReport(RunReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(err: &Error) -> CpaStatus {
    match err {
        Error::Shape(_) => CpaStatus::Shape,
        Error::Config { .. } => CpaStatus::Config,
        Error::Archive { .. } | Error::MissingWeights(_) => CpaStatus::Archive,
        Error::Degenerate(_) => CpaStatus::Degenerate,
        Error::UnknownAgent(_) | Error::OutOfRange(_) => CpaStatus::OutOfRange,
        Error::Io(_) => CpaStatus::Io,
    }
}

struct Failure(CpaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CpaStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic for [`cpa_last_error_message`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CpaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CpaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CpaStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(CpaStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn put<T>(out: *mut *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output string"));
    }
    let c = CString::new(s).map_err(|e| Failure(CpaStatus::InvalidUtf8, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn tensor(data: &[f64], c: usize, h: usize, w: usize) -> Result<Tensor3, Failure> {
    Ok(Tensor3::from_vec(c, h, w, data.to_vec())?)
}

/// Message for the most recent failing call on this thread, or an empty
/// string. Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn cpa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cpa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cpa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn cpa_config_default(out: *mut *mut CpaConfig) -> CpaStatus {
    guard(|| put(out, CpaConfig(SimConfig::default()), "output config"))
}

/// Parses a TOML configuration; missing keys take their defaults.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpa_config_from_toml(toml: *const c_char, out: *mut *mut CpaConfig) -> CpaStatus {
    guard(|| {
        let text = read_str(toml, "toml")?;
        let cfg = SimConfig::from_toml_str(text)?;
        put(out, CpaConfig(cfg), "output config")
    })
}

/// Serialises the configuration back to TOML.
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpa_config_to_toml(config: *const CpaConfig, out: *mut *mut c_char) -> CpaStatus {
    guard(|| {
        let cfg = borrow(config, "config")?;
        put_string(out, cfg.0.to_toml_string()?)
    })
}

/// # Safety
/// `config` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cpa_config_free(config: *mut CpaConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Generates the scenario described by the configuration.
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpa_scenario_generate(config: *const CpaConfig, out: *mut *mut CpaScenario) -> CpaStatus {
    guard(|| {
        let cfg = borrow(config, "config")?;
        put(out, CpaScenario(generate_scenario(&cfg.0.scenario)?), "output scenario")
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpa_scenario_from_json(json: *const c_char, out: *mut *mut CpaScenario) -> CpaStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        put(out, CpaScenario(Scenario::read_json(text.as_bytes())?), "output scenario")
    })
}

/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpa_scenario_to_json(scenario: *const CpaScenario, out: *mut *mut c_char) -> CpaStatus {
    guard(|| {
        let s = borrow(scenario, "scenario")?;
        let mut buf = Vec::new();
        s.0.write_json(&mut buf)?;
        put_string(out, String::from_utf8(buf).map_err(|e| Failure(CpaStatus::InvalidUtf8, e.to_string()))?)
    })
}

/// Number of frames in the scenario.
///
/// # Safety
/// `scenario` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn cpa_scenario_frames(scenario: *const CpaScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.0.frames())
}

/// # Safety
/// `scenario` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cpa_scenario_free(scenario: *mut CpaScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// One end-to-end run at `time` seconds with delay `tau_ms`, using the
/// configuration's remaining run options. `ptam` switches delay
/// compensation on or off.
///
/// # Safety
/// `config` and `scenario` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpa_run_pipeline(
    config: *const CpaConfig,
    scenario: *const CpaScenario,
    time: f64,
    tau_ms: f64,
    ptam: bool,
    out: *mut *mut CpaReport,
) -> CpaStatus {
    guard(|| {
        let cfg = borrow(config, "config")?;
        let scenario = borrow(scenario, "scenario")?;
        let pipeline = Pipeline::new(cfg.0.clone(), scenario.0.clone())?;
        let mut opts = RunOptions::from_config(&cfg.0);
        opts.tau_ms = tau_ms;
        opts.ptam = ptam;
        put(out, CpaReport(pipeline.run(time, &opts)?), "output report")
    })
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpa_report_detection(report: *const CpaReport, out: *mut CpaDetectionSummary) -> CpaStatus {
    guard(|| {
        let r = borrow(report, "report")?;
        let out = out.as_mut().ok_or_else(|| null("output summary"))?;
        let d = &r.0.detection;
        *out = CpaDetectionSummary {
            ap50: d.ap50,
            ap70: d.ap70,
            mean_iou: d.mean_iou,
            ground_truth: d.ground_truth as u64,
            detections: d.detections as u64,
        };
        Ok(())
    })
}

/// Full report as pretty-printed JSON.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpa_report_json(report: *const CpaReport, out: *mut *mut c_char) -> CpaStatus {
    guard(|| {
        let r = borrow(report, "report")?;
        let text = serde_json::to_string_pretty(&r.0).map_err(|e| Failure(CpaStatus::Io, e.to_string()))?;
        put_string(out, text)
    })
}

/// # Safety
/// `report` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cpa_report_free(report: *mut CpaReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Closed-form operation counts of the window cosine similarity.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpa_count_similarity_ops(
    channels: usize,
    height: usize,
    width: usize,
    window: usize,
    mode: CpaSimilarityMode,
    out: *mut CpaOpCounts,
) -> CpaStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("output counts"))?;
        let mode = match mode {
            CpaSimilarityMode::Global => SimilarityMode::Global,
            CpaSimilarityMode::Blockwise => SimilarityMode::Blockwise,
        };
        let c = count_similarity_ops(channels, height, width, window, mode)?;
        *out = CpaOpCounts {
            mul: c.mul,
            add: c.add,
            sqrt: c.sqrt,
            div: c.div,
        };
        Ok(())
    })
}

/// Backward bilinear warp of a `channels × height × width` row-major
/// buffer. `displacement` holds the x plane then the y plane (cells),
/// scaled by `xi`; `weight` is one `height × width` plane multiplied in
/// after sampling. `out` receives `channels × height × width` values.
///
/// # Safety
/// Every buffer must hold the number of values stated above.
#[no_mangle]
pub unsafe extern "C" fn cpa_warp_features(
    features: *const f64,
    channels: usize,
    height: usize,
    width: usize,
    displacement: *const f64,
    xi: f64,
    weight: *const f64,
    out: *mut f64,
) -> CpaStatus {
    guard(|| {
        let plane = height * width;
        let n = channels * plane;
        let f = tensor(slice(features, n, "features")?, channels, height, width)?;
        let dp = tensor(slice(displacement, 2 * plane, "displacement")?, 2, height, width)?;
        let w = tensor(slice(weight, plane, "weight")?, 1, height, width)?;
        if out.is_null() {
            return Err(null("output buffer"));
        }
        let warped = warp_features(&f, &dp, xi, &w)?;
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(warped.data());
        Ok(())
    })
}

/// Window cosine loss of one prediction against its target, both
/// `channels × height × width` buffers, with window size `window`. The
/// gradient with respect to the prediction is written to `grad` unless it
/// is null.
///
/// # Safety
/// `pred`, `target` and a non-null `grad` must hold
/// `channels × height × width` values; `loss` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpa_temporal_loss(
    pred: *const f64,
    target: *const f64,
    channels: usize,
    height: usize,
    width: usize,
    window: usize,
    loss: *mut f64,
    grad: *mut f64,
) -> CpaStatus {
    guard(|| {
        let n = channels * height * width;
        let p = tensor(slice(pred, n, "prediction")?, channels, height, width)?;
        let g = tensor(slice(target, n, "target")?, channels, height, width)?;
        let loss = loss.as_mut().ok_or_else(|| null("output loss"))?;
        let l = temporal_loss(&[p], &[g], window, CosineGranularity::Window)?;
        *loss = l.total;
        if !grad.is_null() {
            std::slice::from_raw_parts_mut(grad, n).copy_from_slice(l.grads[0].data());
        }
        Ok(())
    })
}
