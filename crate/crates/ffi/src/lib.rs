//! C ABI over the `radblock` pipeline.
//!
//! Every fallible function returns an [`RbStatus`]. On failure a message is
//! kept per thread and can be read with [`rb_last_error_message`]. Handles
//! are opaque, created by `*_new`/`*_fit` and released by the matching
//! `*_free`. Panics never cross the boundary; they surface as
//! [`RbStatus::Panic`].
//!
//! Raw frames are passed as interleaved `float` pairs (re, im) in antenna,
//! sample, chirp order, i.e. `2 * antennas * samples * chirps` floats.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ndarray::Array3;
use num_complex::Complex64;

use radblock::experiment::ExperimentConfig;
use radblock::metrics::ConfusionMatrix;
use radblock::pipeline::Detector;
use radblock::predict::{future_label, stack_states, KnnConfig, KnnModel};
use radblock::sim::{RadarConfig, RadarFrameCube};
use radblock::tracking::{measure, Tracker};
use radblock::Error;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> RbStatus {
    match e {
        Error::ShapeMismatch { .. } | Error::DimensionMismatch { .. } => RbStatus::ShapeMismatch,
        Error::SingularInnovation { .. } | Error::OriginSingularity => RbStatus::Numerical,
        Error::Io { .. } => RbStatus::Io,
        Error::Context { source, .. } => status_of(source),
        _ => RbStatus::InvalidArgument,
    }
}

struct Failure(RbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail<T>(status: RbStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            RbStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        fail(RbStatus::NullPointer, format!("{name} is null"))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or valid for `len` writes.
unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Message of the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// One live track.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RbTrack {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub misses: u32,
    pub age: u32,
}

/// Detector plus tracker for one stream of frames.
pub struct RbPipeline {
    radar: RadarConfig,
    detector: Detector,
    tracker: Tracker,
    frames: u64,
}

fn new_pipeline(cfg: &ExperimentConfig) -> Result<Box<RbPipeline>, Failure> {
    let detector = Detector::new(&cfg.scenario.radar, &cfg.pipeline)?;
    let tracker = Tracker::new(cfg.pipeline.tracker.clone())?;
    Ok(Box::new(RbPipeline {
        radar: cfg.scenario.radar.clone(),
        detector,
        tracker,
        frames: 0,
    }))
}

/// Creates a pipeline. `config_toml` is an experiment config in TOML (only
/// the radar and pipeline tables are used) or null for defaults.
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rb_pipeline_new(
    config_toml: *const c_char,
    out: *mut *mut RbPipeline,
) -> RbStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let cfg = if config_toml.is_null() {
            ExperimentConfig::default()
        } else {
            let text = CStr::from_ptr(config_toml)
                .to_str()
                .map_err(|_| Failure(RbStatus::InvalidArgument, "config is not UTF-8".into()))?;
            ExperimentConfig::from_toml_str(text)?
        };
        *out = Box::into_raw(new_pipeline(&cfg)?);
        Ok(())
    })
}

/// Releases a pipeline; null is ignored.
///
/// # Safety
/// `p` must come from [`rb_pipeline_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rb_pipeline_free(p: *mut RbPipeline) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of floats expected per frame.
///
/// # Safety
/// `p` must be a live pipeline handle.
#[no_mangle]
pub unsafe extern "C" fn rb_pipeline_frame_len(p: *const RbPipeline, out: *mut usize) -> RbStatus {
    guard(|| {
        non_null(p, "pipeline")?;
        non_null(out, "out")?;
        let r = &(*p).radar;
        *out = 2 * r.rx_antennas * r.samples * r.chirps;
        Ok(())
    })
}

/// Processes one frame and advances the tracker. `measurements` receives
/// the number of objects detected in the frame (may be null).
///
/// # Safety
/// `p` must be a live handle and `iq` valid for `len` floats.
#[no_mangle]
pub unsafe extern "C" fn rb_pipeline_process_frame(
    p: *mut RbPipeline,
    iq: *const f32,
    len: usize,
    measurements: *mut usize,
) -> RbStatus {
    guard(|| {
        non_null(p, "pipeline")?;
        let p = &mut *p;
        let r = &p.radar;
        let shape = (r.rx_antennas, r.samples, r.chirps);
        let expected = 2 * shape.0 * shape.1 * shape.2;
        if len != expected {
            return fail(
                RbStatus::ShapeMismatch,
                format!("frame needs {expected} floats, got {len}"),
            );
        }
        let data = slice(iq, len, "iq")?;
        let samples: Vec<Complex64> = data
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0] as f64, c[1] as f64))
            .collect();
        let frame = RadarFrameCube {
            samples: Array3::from_shape_vec(shape, samples).expect("length checked"),
            frame: p.frames,
        };
        let out = p.detector.process(&frame)?;
        p.tracker.step(&out.measurements);
        p.frames += 1;
        if !measurements.is_null() {
            *measurements = out.measurements.len();
        }
        Ok(())
    })
}

/// Copies up to `capacity` live tracks into `out`; `count` receives the
/// total number of live tracks.
///
/// # Safety
/// `p` must be a live handle, `out` valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn rb_pipeline_tracks(
    p: *const RbPipeline,
    out: *mut RbTrack,
    capacity: usize,
    count: *mut usize,
) -> RbStatus {
    guard(|| {
        non_null(p, "pipeline")?;
        non_null(count, "count")?;
        let tracks = (*p).tracker.tracks();
        let dst = slice_mut(out, capacity.min(tracks.len()), "out")?;
        for (d, t) in dst.iter_mut().zip(tracks) {
            *d = RbTrack {
                id: t.id,
                x: t.mean[0],
                y: t.mean[1],
                vx: t.mean[2],
                vy: t.mean[3],
                misses: t.misses,
                age: t.age,
            };
        }
        *count = tracks.len();
        Ok(())
    })
}

/// Writes the zero-padded stacked track features (`4 * k_max` values).
///
/// # Safety
/// `p` must be a live handle, `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rb_pipeline_features(
    p: *const RbPipeline,
    k_max: usize,
    out: *mut f64,
    len: usize,
) -> RbStatus {
    guard(|| {
        non_null(p, "pipeline")?;
        if len != 4 * k_max {
            return fail(
                RbStatus::ShapeMismatch,
                format!("features need {} values, got {len}", 4 * k_max),
            );
        }
        let f = stack_states((*p).tracker.tracks(), k_max);
        slice_mut(out, len, "out")?.copy_from_slice(&f.values);
        Ok(())
    })
}

/// Drops all tracks and restarts frame numbering.
///
/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rb_pipeline_reset(p: *mut RbPipeline) -> RbStatus {
    guard(|| {
        non_null(p, "pipeline")?;
        (*p).tracker.reset();
        (*p).frames = 0;
        Ok(())
    })
}

/// Fitted k-NN classifier.
pub struct RbKnn {
    model: KnnModel,
}

/// Fits a k-NN model on `n` row-major rows of `dim` features with 0/1
/// labels.
///
/// # Safety
/// `features` valid for `n * dim` reads, `labels` for `n`, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rb_knn_fit(
    features: *const f64,
    labels: *const u8,
    n: usize,
    dim: usize,
    k: usize,
    standardize: bool,
    out: *mut *mut RbKnn,
) -> RbStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let total = n
            .checked_mul(dim)
            .ok_or_else(|| Failure(RbStatus::InvalidArgument, "n * dim overflows".into()))?;
        let x = slice(features, total, "features")?;
        let y = slice(labels, n, "labels")?;
        if dim == 0 {
            return fail(RbStatus::InvalidArgument, "dim must be > 0");
        }
        let rows: Vec<Vec<f64>> = x.chunks_exact(dim).map(<[f64]>::to_vec).collect();
        let y: Vec<bool> = y.iter().map(|v| *v != 0).collect();
        let model = KnnModel::fit(&rows, &y, &KnnConfig { k, standardize })?;
        *out = Box::into_raw(Box::new(RbKnn { model }));
        Ok(())
    })
}

/// Predicts one query; `prob` receives the positive vote share and `label`
/// the decision (either may be null).
///
/// # Safety
/// `m` must be a live handle and `query` valid for `dim` reads.
#[no_mangle]
pub unsafe extern "C" fn rb_knn_predict(
    m: *const RbKnn,
    query: *const f64,
    dim: usize,
    prob: *mut f64,
    label: *mut u8,
) -> RbStatus {
    guard(|| {
        non_null(m, "model")?;
        let q = slice(query, dim, "query")?;
        let p = (*m).model.predict_proba(q)?;
        if !prob.is_null() {
            *prob = p;
        }
        if !label.is_null() {
            *label = u8::from(p > 0.5);
        }
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `m` must come from [`rb_knn_fit`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rb_knn_free(m: *mut RbKnn) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// OR of `blocked[t+1..=t+t_p]`. `out` receives 1 or 0, or -1 when the
/// window runs past the series.
///
/// # Safety
/// `blocked` valid for `len` reads, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rb_future_label(
    blocked: *const u8,
    len: usize,
    t: usize,
    t_p: usize,
    out: *mut i32,
) -> RbStatus {
    guard(|| {
        non_null(out, "out")?;
        let b: Vec<bool> = slice(blocked, len, "blocked")?
            .iter()
            .map(|v| *v != 0)
            .collect();
        *out = match future_label(&b, t, t_p) {
            Some(true) => 1,
            Some(false) => 0,
            None => -1,
        };
        Ok(())
    })
}

/// Radar measurement `(rho, v, theta)` of a state `[x, y, vx, vy]`.
///
/// # Safety
/// `state` valid for 4 reads, `out` for 3 writes.
#[no_mangle]
pub unsafe extern "C" fn rb_measure(state: *const f64, out: *mut f64) -> RbStatus {
    guard(|| {
        let s = slice(state, 4, "state")?;
        let m = measure(&nalgebra::Vector4::new(s[0], s[1], s[2], s[3]))?;
        slice_mut(out, 3, "out")?.copy_from_slice(m.as_slice());
        Ok(())
    })
}

/// Confusion counts and derived metrics. Undefined ratios are NaN with the
/// matching `has_*` flag cleared.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RbMetrics {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub has_accuracy: bool,
    pub has_precision: bool,
    pub has_recall: bool,
    pub has_f1: bool,
}

/// Evaluates `n` 0/1 predictions against labels.
///
/// # Safety
/// `predictions` and `labels` valid for `n` reads, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rb_evaluate(
    predictions: *const u8,
    labels: *const u8,
    n: usize,
    out: *mut RbMetrics,
) -> RbStatus {
    guard(|| {
        non_null(out, "out")?;
        let p: Vec<bool> = slice(predictions, n, "predictions")?
            .iter()
            .map(|v| *v != 0)
            .collect();
        let l: Vec<bool> = slice(labels, n, "labels")?
            .iter()
            .map(|v| *v != 0)
            .collect();
        let c = ConfusionMatrix::from_predictions(&p, &l)?;
        let val = |v: Option<f64>| v.unwrap_or(f64::NAN);
        *out = RbMetrics {
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
            accuracy: val(c.accuracy()),
            precision: val(c.precision()),
            recall: val(c.recall()),
            f1: val(c.f1()),
            has_accuracy: c.accuracy().is_some(),
            has_precision: c.precision().is_some(),
            has_recall: c.recall().is_some(),
            has_f1: c.f1().is_some(),
        };
        Ok(())
    })
}
