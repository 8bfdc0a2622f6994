//! C ABI over the `mlgp` estimator.
//!
//! Every function returns an [`MlgpStatus`]; on failure the message is kept
//! per thread and read back with [`mlgp_last_error_message`]. Models are
//! opaque handles released with [`mlgp_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::OnceLock;

use mlgp::features::{build_feature_vector, FeatureConfig, FeatureVector, LAYOUT_VERSION, N_FEATURES};
use mlgp::hierarchy::{load_bundle, MultiLayerModel};
use mlgp::ingest::{unlabeled_windows, ImuRecording, ImuSample, MIN_WINDOW_SAMPLES};
use mlgp::labels::PdClass;
use mlgp::Error;

/// Values per sample row: `t, ax, ay, az, gx, gy, gz`.
pub const MLGP_SAMPLE_STRIDE: usize = 7;
pub const MLGP_FEATURE_COUNT: usize = 132;
const _: () = assert!(MLGP_FEATURE_COUNT == N_FEATURES);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlgpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Data = 4,
    Config = 5,
    LayoutMismatch = 6,
    Numerical = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlgpClass {
    Balanced = 0,
    Tremor = 1,
    Bradykinesia = 2,
    Dyskinesia = 3,
}

impl From<PdClass> for MlgpClass {
    fn from(c: PdClass) -> Self {
        match c {
            PdClass::Balanced => MlgpClass::Balanced,
            PdClass::Tremor => MlgpClass::Tremor,
            PdClass::Bradykinesia => MlgpClass::Bradykinesia,
            PdClass::Dyskinesia => MlgpClass::Dyskinesia,
        }
    }
}

/// Decision for one window. `y_bk` and `y_dk` are NaN when the tremor gate fired.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlgpPrediction {
    pub pd_class: MlgpClass,
    pub severity: u8,
    pub y_tm: f64,
    pub y_bk: f64,
    pub y_dk: f64,
}

/// Trained three-layer model.
pub struct MlgpModel {
    inner: MultiLayerModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MlgpStatus {
    match e {
        Error::Io { .. } => MlgpStatus::Io,
        Error::LayoutMismatch { .. } => MlgpStatus::LayoutMismatch,
        Error::NumericalBreakdown(_) | Error::FeatureComputationFailed { .. } => MlgpStatus::Numerical,
        Error::Config(_) | Error::InvalidOptions(_) | Error::InvalidSpec(_) => MlgpStatus::Config,
        Error::Fold { source, .. } => status_of(source),
        _ => MlgpStatus::Data,
    }
}

struct Fail(MlgpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MlgpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MlgpStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MlgpStatus::Panic
        }
    }
}

fn null(name: &str) -> Fail {
    Fail(MlgpStatus::NullPointer, format!("{name} is null"))
}

/// Message of the last failure on this thread, or NULL. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn mlgp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static string.
#[no_mangle]
pub extern "C" fn mlgp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Feature layout identifier, static string.
#[no_mangle]
pub extern "C" fn mlgp_layout_version() -> *const c_char {
    static LAYOUT: OnceLock<CString> = OnceLock::new();
    LAYOUT
        .get_or_init(|| CString::new(LAYOUT_VERSION).expect("no NUL in layout id"))
        .as_ptr()
}

/// Loads a model bundle directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mlgp_model_load(dir: *const c_char, out: *mut *mut MlgpModel) -> MlgpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if dir.is_null() {
            return Err(null("dir"));
        }
        let dir = CStr::from_ptr(dir)
            .to_str()
            .map_err(|_| Fail(MlgpStatus::InvalidArgument, "dir is not UTF-8".into()))?;
        let inner = load_bundle(Path::new(dir))?;
        *out = Box::into_raw(Box::new(MlgpModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`mlgp_model_load`] and not be freed already. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn mlgp_model_free(model: *mut MlgpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn read_samples(samples: *const f64, n_samples: usize) -> Result<Vec<ImuSample>, Fail> {
    if samples.is_null() {
        return Err(null("samples"));
    }
    let flat = std::slice::from_raw_parts(samples, n_samples * MLGP_SAMPLE_STRIDE);
    let mut out = Vec::with_capacity(n_samples);
    for (i, row) in flat.chunks_exact(MLGP_SAMPLE_STRIDE).enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Fail(MlgpStatus::InvalidArgument, format!("sample {i} is not finite")));
        }
        if out.last().is_some_and(|p: &ImuSample| row[0] <= p.t) {
            return Err(Fail(MlgpStatus::InvalidArgument, format!("timestamps not increasing at sample {i}")));
        }
        let mut s = ImuSample {
            t: row[0],
            acc: [row[1], row[2], row[3]],
            gyr: [row[4], row[5], row[6]],
        };
        s.clamp_to_range();
        out.push(s);
    }
    Ok(out)
}

fn featurize(samples: Vec<ImuSample>, rate_hz: f64, window_index: u32) -> Result<FeatureVector, Fail> {
    let rec = ImuRecording::new("ffi", rate_hz, samples)?;
    let (windows, _) = unlabeled_windows(&rec, MIN_WINDOW_SAMPLES);
    let w = windows.iter().find(|w| w.window_index == window_index).ok_or_else(|| {
        Fail(
            MlgpStatus::Data,
            format!("minute {window_index} is absent or has fewer than {MIN_WINDOW_SAMPLES} samples"),
        )
    })?;
    Ok(build_feature_vector(w, &FeatureConfig::default())?)
}

/// Feature vector of minute `window_index` (samples with
/// `floor(t / 60) == window_index`). Samples of the two minutes on either
/// side, when present, feed the five-minute rest features.
///
/// `samples` holds `n_samples` rows of [`MLGP_SAMPLE_STRIDE`] values:
/// time in seconds, acceleration in G, angular rate in deg/s.
///
/// # Safety
/// `samples` must point to `n_samples * MLGP_SAMPLE_STRIDE` doubles and
/// `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mlgp_featurize_window(
    samples: *const f64,
    n_samples: usize,
    rate_hz: f64,
    window_index: u32,
    out: *mut f64,
    out_len: usize,
) -> MlgpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len < N_FEATURES {
            return Err(Fail(
                MlgpStatus::BufferTooSmall,
                format!("need {N_FEATURES} values, got {out_len}"),
            ));
        }
        let v = featurize(read_samples(samples, n_samples)?, rate_hz, window_index)?;
        ptr::copy_nonoverlapping(v.values.as_ptr(), out, N_FEATURES);
        Ok(())
    })
}

/// Class and severity of one full feature vector.
///
/// # Safety
/// `model` must be a live handle, `features` must point to `n_features`
/// doubles and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mlgp_predict(
    model: *const MlgpModel,
    features: *const f64,
    n_features: usize,
    out: *mut MlgpPrediction,
) -> MlgpStatus {
    guard(|| {
        if model.is_null() {
            return Err(null("model"));
        }
        if features.is_null() {
            return Err(null("features"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let values = std::slice::from_raw_parts(features, n_features).to_vec();
        let v = FeatureVector::new(values)?;
        let p = (*model).inner.predict_window(&v)?;
        *out = MlgpPrediction {
            pd_class: p.pd_class.into(),
            severity: p.severity,
            y_tm: p.y_tm,
            y_bk: p.y_bk.unwrap_or(f64::NAN),
            y_dk: p.y_dk.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Featurizes minute `window_index` and predicts it in one call.
///
/// # Safety
/// As for [`mlgp_featurize_window`] and [`mlgp_predict`].
#[no_mangle]
pub unsafe extern "C" fn mlgp_predict_window(
    model: *const MlgpModel,
    samples: *const f64,
    n_samples: usize,
    rate_hz: f64,
    window_index: u32,
    out: *mut MlgpPrediction,
) -> MlgpStatus {
    let mut buf = [0.0; N_FEATURES];
    let s = mlgp_featurize_window(samples, n_samples, rate_hz, window_index, buf.as_mut_ptr(), N_FEATURES);
    if s != MlgpStatus::Ok {
        return s;
    }
    mlgp_predict(model, buf.as_ptr(), N_FEATURES, out)
}
