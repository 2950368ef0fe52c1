//! C ABI over the laserfault library.
//!
//! Every function returns an [`LfStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and can be read with
//! [`lf_last_error_message`]. Models and detectors are opaque handles that
//! must be released with their `_free` function. Panics never cross the
//! boundary; they are reported as [`LfStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use laserfault::baselines::ThresholdDetector;
use laserfault::checkpoint::{Checkpoint, ModelKind};
use laserfault::degradation::{compute_rate_k, current_at, DegradationCoefficients, LaserParams};
use laserfault::metrics::{auc, confusion_matrix, pr_curve, roc_curve, EvaluationSet, Predictor};
use laserfault::mode::NUM_CLASSES;
use laserfault::pipeline::{compress_to_window, RawWindow, WINDOW_LEN};
use laserfault::{DegradationMode, Error};

/// Number of classes; score buffers hold this many doubles per window.
pub const LF_NUM_CLASSES: usize = 4;
/// Steps per model input window.
pub const LF_WINDOW_LEN: usize = 100;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Io = 4,
    Format = 5,
    VersionMismatch = 6,
    Numeric = 7,
    Model = 8,
    Panic = 9,
}

/// Model family codes returned by [`lf_model_kind`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfModelKind {
    Lstm = 0,
    Knn = 1,
    Logreg = 2,
    Rf = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LfLaserParams {
    pub optical_power_mw: f64,
    pub threshold_current_ma: f64,
    pub temperature_k: f64,
    pub wavelength_nm: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LfCoefficients {
    pub beta_ma: f64,
    pub derating_exponent: f64,
    pub scale_parameter: f64,
    pub activation_energy_ev: f64,
}

/// Opaque trained model loaded from a checkpoint file.
pub struct LfModel(Checkpoint);

/// Opaque rule-based threshold detector.
pub struct LfThresholdDetector(ThresholdDetector);

const _: () = assert!(LF_NUM_CLASSES == NUM_CLASSES && LF_WINDOW_LEN == WINDOW_LEN);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(err: &Error) -> LfStatus {
    match err {
        Error::Domain { .. } => LfStatus::Domain,
        Error::Argument(_) | Error::Config(_) | Error::Curve { .. } => LfStatus::InvalidArgument,
        Error::Numeric { .. } | Error::Divergence { .. } | Error::Generation(_) => LfStatus::Numeric,
        Error::Model(_) => LfStatus::Model,
        Error::VersionMismatch { .. } => LfStatus::VersionMismatch,
        Error::Format { .. } | Error::Json(_) | Error::Csv(_) => LfStatus::Format,
        Error::Io { .. } => LfStatus::Io,
    }
}

/// Failure inside the wrapper itself, before or after the library call.
struct Fail(LfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(LfStatus::NullPointer, format!("{name} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> LfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(String::new());
            LfStatus::Ok
        }
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LfStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn out<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    ptr.as_mut().ok_or_else(|| null(name))
}

fn modes(codes: &[u8]) -> Result<Vec<DegradationMode>, Fail> {
    Ok(codes
        .iter()
        .map(|&c| DegradationMode::from_code(c))
        .collect::<laserfault::Result<_>>()?)
}

fn laser(p: &LfLaserParams) -> laserfault::Result<LaserParams> {
    LaserParams::new(
        p.optical_power_mw,
        p.threshold_current_ma,
        p.temperature_k,
        p.wavelength_nm,
    )
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`) and returns the full message length
/// without the terminator. `buf` may be null to query the length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn lf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Degradation rate `k` (1/h) for a laser and coefficient set.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn lf_rate_k(
    laser_params: *const LfLaserParams,
    coefficients: *const LfCoefficients,
    out_k: *mut f64,
) -> LfStatus {
    guard(|| {
        let l = laser(laser_params.as_ref().ok_or_else(|| null("laser_params"))?)?;
        let c = coefficients.as_ref().ok_or_else(|| null("coefficients"))?;
        let coeffs = DegradationCoefficients {
            beta_ma: c.beta_ma,
            derating_exponent: c.derating_exponent,
            scale_parameter: c.scale_parameter,
            activation_energy_ev: c.activation_energy_ev,
        };
        *out(out_k, "out_k")? = compute_rate_k(&l, &coeffs)?;
        Ok(())
    })
}

/// Operating current `I0 + beta * exp(k * t)` in mA.
///
/// # Safety
/// `out_current` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn lf_current_at(
    t_hours: f64,
    threshold_current_ma: f64,
    beta_ma: f64,
    k_per_hour: f64,
    out_current: *mut f64,
) -> LfStatus {
    guard(|| {
        *out(out_current, "out_current")? = current_at(t_hours, threshold_current_ma, beta_ma, k_per_hour)?;
        Ok(())
    })
}

/// Resamples `series` to exactly `out_len` values (block means or repetition).
///
/// # Safety
/// `series` must hold `len` doubles and `out_values` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lf_compress_window(
    series: *const f64,
    len: usize,
    out_values: *mut f64,
    out_len: usize,
) -> LfStatus {
    guard(|| {
        let s = slice(series, len, "series")?;
        if out_values.is_null() {
            return Err(null("out_values"));
        }
        let w = compress_to_window(s, out_len)?;
        std::slice::from_raw_parts_mut(out_values, out_len).copy_from_slice(&w);
        Ok(())
    })
}

/// Threshold detector with default rule parameters.
///
/// # Safety
/// `out_detector` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn lf_threshold_detector_new(out_detector: *mut *mut LfThresholdDetector) -> LfStatus {
    lf_threshold_detector_with(
        ThresholdDetector::default().eol_current_increase_fraction,
        ThresholdDetector::default().sudden_jump_step_fraction,
        ThresholdDetector::default().rapid_crossing_index_bound,
        out_detector,
    )
}

/// Threshold detector with explicit rule parameters.
///
/// # Safety
/// `out_detector` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn lf_threshold_detector_with(
    eol_current_increase_fraction: f64,
    sudden_jump_step_fraction: f64,
    rapid_crossing_index_bound: usize,
    out_detector: *mut *mut LfThresholdDetector,
) -> LfStatus {
    guard(|| {
        let slot = out(out_detector, "out_detector")?;
        let d = ThresholdDetector {
            eol_current_increase_fraction,
            sudden_jump_step_fraction,
            rapid_crossing_index_bound,
        };
        d.validate()?;
        *slot = Box::into_raw(Box::new(LfThresholdDetector(d)));
        Ok(())
    })
}

/// # Safety
/// `detector` must come from `lf_threshold_detector_new`/`_with` and not be
/// used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lf_threshold_detector_free(detector: *mut LfThresholdDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// Classifies one current series; writes the mode code (0..=3).
///
/// # Safety
/// `currents` must hold `len` doubles; other pointers valid or null.
#[no_mangle]
pub unsafe extern "C" fn lf_threshold_classify(
    detector: *const LfThresholdDetector,
    currents: *const f64,
    len: usize,
    threshold_current_ma: f64,
    out_mode: *mut u8,
) -> LfStatus {
    guard(|| {
        let d = detector.as_ref().ok_or_else(|| null("detector"))?;
        let c = slice(currents, len, "currents")?;
        *out(out_mode, "out_mode")? = d.0.classify(c, threshold_current_ma)?.code();
        Ok(())
    })
}

/// Row-major 4x4 confusion counts, `out_counts[truth * 4 + predicted]`.
///
/// # Safety
/// `truth` and `predicted` must hold `n` bytes; `out_counts` 16 values.
#[no_mangle]
pub unsafe extern "C" fn lf_confusion_matrix(
    truth: *const u8,
    predicted: *const u8,
    n: usize,
    out_counts: *mut u64,
) -> LfStatus {
    guard(|| {
        let t = modes(slice(truth, n, "truth")?)?;
        let p = modes(slice(predicted, n, "predicted")?)?;
        if out_counts.is_null() {
            return Err(null("out_counts"));
        }
        let cm = confusion_matrix(&t, &p)?;
        let dst = std::slice::from_raw_parts_mut(out_counts, NUM_CLASSES * NUM_CLASSES);
        for (i, row) in cm.counts.iter().enumerate() {
            dst[i * NUM_CLASSES..(i + 1) * NUM_CLASSES].copy_from_slice(row);
        }
        Ok(())
    })
}

unsafe fn curve_auc(
    truth: *const u8,
    scores: *const f64,
    n: usize,
    class_code: u8,
    out_auc: *mut f64,
    pr: bool,
) -> LfStatus {
    guard(|| {
        let t = modes(slice(truth, n, "truth")?)?;
        let flat = slice(scores, n * NUM_CLASSES, "scores")?;
        let rows: Vec<[f64; NUM_CLASSES]> = flat
            .chunks_exact(NUM_CLASSES)
            .map(|c| c.try_into().expect("chunk of NUM_CLASSES"))
            .collect();
        let class = DegradationMode::from_code(class_code)?;
        let curve = if pr {
            pr_curve(&t, &rows, class)?
        } else {
            roc_curve(&t, &rows, class)?
        };
        *out(out_auc, "out_auc")? = auc(&curve.points);
        Ok(())
    })
}

/// One-vs-rest ROC AUC for `class_code`; `scores` is `n` rows of 4.
///
/// # Safety
/// `truth` must hold `n` bytes and `scores` `4 * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn lf_roc_auc(
    truth: *const u8,
    scores: *const f64,
    n: usize,
    class_code: u8,
    out_auc: *mut f64,
) -> LfStatus {
    curve_auc(truth, scores, n, class_code, out_auc, false)
}

/// One-vs-rest precision-recall AUC for `class_code`.
///
/// # Safety
/// As for [`lf_roc_auc`].
#[no_mangle]
pub unsafe extern "C" fn lf_pr_auc(
    truth: *const u8,
    scores: *const f64,
    n: usize,
    class_code: u8,
    out_auc: *mut f64,
) -> LfStatus {
    curve_auc(truth, scores, n, class_code, out_auc, true)
}

/// Loads a checkpoint written by `laserfault train`.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out_model` valid or null.
#[no_mangle]
pub unsafe extern "C" fn lf_model_load(path: *const c_char, out_model: *mut *mut LfModel) -> LfStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(LfStatus::InvalidArgument, "path is not UTF-8".into()))?;
        *slot = Box::into_raw(Box::new(LfModel(Checkpoint::load(Path::new(p))?)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from `lf_model_load` and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lf_model_free(model: *mut LfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn lf_model_kind(model: *const LfModel, out_kind: *mut LfModelKind) -> LfStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *out(out_kind, "out_kind")? = match m.0.kind() {
            ModelKind::Lstm => LfModelKind::Lstm,
            ModelKind::Knn => LfModelKind::Knn,
            ModelKind::Logreg => LfModelKind::Logreg,
            ModelKind::Rf => LfModelKind::Rf,
        };
        Ok(())
    })
}

/// Classifies one current series of any length (resampled to
/// `LF_WINDOW_LEN` steps). Writes the mode code and 4 class scores.
///
/// # Safety
/// `currents` must hold `len` doubles and `out_scores` 4 doubles; other
/// pointers valid or null.
#[no_mangle]
pub unsafe extern "C" fn lf_model_predict(
    model: *const LfModel,
    laser_params: *const LfLaserParams,
    currents: *const f64,
    len: usize,
    out_mode: *mut u8,
    out_scores: *mut f64,
) -> LfStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let l = laser(laser_params.as_ref().ok_or_else(|| null("laser_params"))?)?;
        let c = slice(currents, len, "currents")?;
        let mode_slot = out(out_mode, "out_mode")?;
        if out_scores.is_null() {
            return Err(null("out_scores"));
        }
        let window = RawWindow {
            sample_id: 0,
            label: DegradationMode::Normal,
            laser: l,
            times: (0..WINDOW_LEN).map(|i| i as f64).collect(),
            currents: compress_to_window(c, WINDOW_LEN)?,
            fault_onset_step: None,
            mutation: None,
        };
        let windows = [window];
        let (mode, scores) = m.0.predict_set(&EvaluationSet { raw: &windows })?[0];
        *mode_slot = mode.code();
        std::slice::from_raw_parts_mut(out_scores, NUM_CLASSES).copy_from_slice(&scores);
        Ok(())
    })
}
