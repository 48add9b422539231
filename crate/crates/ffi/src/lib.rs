//! C ABI over `mimo-fp`.
//!
//! Objects are opaque handles created by `mfp_*_new` / `mfp_*_load` /
//! `mfp_model_fit` and released with the matching `mfp_*_free`. Every
//! fallible call returns an [`MfpStatus`]; on failure a description is
//! available from [`mfp_last_error_message`] on the same thread.
//!
//! Handles are immutable after construction and may be shared across threads
//! for read-only calls (predict, locate, save).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use mimo_fp::{Error, FitConfig, GprModel, KnnConfig, PathLossModel, Position, RssVector, TrainingSet};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Geometry = 4,
    IllConditioned = 5,
    Numerical = 6,
    Config = 7,
    Parse = 8,
    Experiment = 9,
    Io = 10,
    Utf8 = 11,
    Panic = 12,
}

/// Fingerprint set: L RSS vectors of length M with their positions.
pub struct MfpTrainingSet(TrainingSet);

/// Fitted GP positioner.
pub struct MfpModel(GprModel);

/// Posterior mean position and per-coordinate variances (m^2).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MfpPrediction {
    pub x1: f64,
    pub x2: f64,
    pub var_x1: f64,
    pub var_x2: f64,
}

/// Hyperparameter search settings. Obtain defaults from [`mfp_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfpFitOptions {
    pub restarts: u32,
    pub max_evals: u32,
    pub seed: u64,
    /// Search on a random subset of this many fingerprints; 0 uses all.
    pub search_points: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MfpStatus {
    match e {
        Error::InvalidArgument(_) => MfpStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => MfpStatus::Dimension,
        Error::DegenerateGeometry(_) => MfpStatus::Geometry,
        Error::IllConditionedKernel { .. } => MfpStatus::IllConditioned,
        Error::Numerical(_) => MfpStatus::Numerical,
        Error::Config(_) => MfpStatus::Config,
        Error::Parse { .. } => MfpStatus::Parse,
        Error::ExperimentAborted(_) => MfpStatus::Experiment,
        Error::Io { .. } => MfpStatus::Io,
    }
}

struct Fail(MfpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MfpStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MfpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MfpStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MfpStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p).to_str().map(PathBuf::from).map_err(|_| Fail(MfpStatus::Utf8, "path is not valid UTF-8".into()))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn rss_arg(rss: *const f64, m: usize) -> Result<RssVector, Fail> {
    Ok(RssVector::new(slice_arg(rss, m, "rss")?.to_vec())?)
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Description of the last failure on this thread; empty after a success.
/// The pointer stays valid until the next `mfp_*` call on this thread.
#[no_mangle]
pub extern "C" fn mfp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mfp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a training set from `l` row-major RSS vectors of length `m` and
/// `l` (x1, x2) pairs.
///
/// # Safety
/// `rss` must point to `l * m` doubles, `positions` to `2 * l` doubles and
/// `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn mfp_training_set_new(
    rss: *const f64,
    l: usize,
    m: usize,
    positions: *const f64,
    out: *mut *mut MfpTrainingSet,
) -> MfpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if l == 0 || m == 0 {
            return Err(Fail(MfpStatus::InvalidArgument, "l and m must be >= 1".into()));
        }
        let total = l.checked_mul(m).ok_or_else(|| Fail(MfpStatus::InvalidArgument, "l * m overflows".into()))?;
        let values = slice_arg(rss, total, "rss")?;
        let pos = slice_arg(positions, 2 * l, "positions")?;
        let inputs =
            values.chunks_exact(m).map(|row| RssVector::new(row.to_vec())).collect::<mimo_fp::Result<Vec<_>>>()?;
        let positions = pos.chunks_exact(2).map(|p| Position::new(p[0], p[1])).collect();
        *out = Box::into_raw(Box::new(MfpTrainingSet(TrainingSet::new(inputs, positions)?)));
        Ok(())
    })
}

/// Loads a fingerprint CSV (`x1,x2,rss_0,...`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfp_training_set_load_csv(path: *const c_char, out: *mut *mut MfpTrainingSet) -> MfpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let set = mimo_fp::harness::load_fingerprints(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(MfpTrainingSet(set)));
        Ok(())
    })
}

/// Number of fingerprints, or 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfp_training_set_len(set: *const MfpTrainingSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// RSS vector length M, or 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfp_training_set_dim(set: *const MfpTrainingSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.dim())
}

/// # Safety
/// `set` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mfp_training_set_free(set: *mut MfpTrainingSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

#[no_mangle]
pub extern "C" fn mfp_fit_options_default() -> MfpFitOptions {
    let d = FitConfig::default();
    MfpFitOptions { restarts: d.restarts as u32, max_evals: d.max_evals as u32, seed: d.seed, search_points: 0 }
}

/// Fits one GP per coordinate. `options` may be null for defaults.
///
/// # Safety
/// `set` must be a live handle, `options` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfp_model_fit(
    set: *const MfpTrainingSet,
    options: *const MfpFitOptions,
    out: *mut *mut MfpModel,
) -> MfpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let set = set.as_ref().ok_or_else(|| null("training set"))?;
        let opts = options.as_ref().copied().unwrap_or_else(|| mfp_fit_options_default());
        let cfg = FitConfig {
            restarts: opts.restarts as usize,
            max_evals: opts.max_evals as usize,
            seed: opts.seed,
            search_points: (opts.search_points > 0).then_some(opts.search_points as usize),
            hyperparameters: None,
        };
        *out = Box::into_raw(Box::new(MfpModel(mimo_fp::fit(&set.0, &cfg)?)));
        Ok(())
    })
}

/// Loads a model file written by [`mfp_model_save`] or the CLI.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfp_model_load(path: *const c_char, out: *mut *mut MfpModel) -> MfpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        *out = Box::into_raw(Box::new(MfpModel(GprModel::load(&path_arg(path)?)?)));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mfp_model_save(model: *const MfpModel, path: *const c_char) -> MfpStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        model.0.save(&path_arg(path)?)?;
        Ok(())
    })
}

/// RSS vector length the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfp_model_dim(model: *const MfpModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.training_set().dim())
}

/// Posterior position for one RSS vector of length `m`.
///
/// # Safety
/// `model` must be a live handle, `rss` must point to `m` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfp_model_predict(
    model: *const MfpModel,
    rss: *const f64,
    m: usize,
    out: *mut MfpPrediction,
) -> MfpStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out_arg(out, "out")?;
        let p = model.0.predict(&rss_arg(rss, m)?)?;
        *out = MfpPrediction { x1: p.mean.x1, x2: p.mean.x2, var_x1: p.var_x1, var_x2: p.var_x2 };
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mfp_model_free(model: *mut MfpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Weighted kNN position estimate with `kappa` neighbours.
///
/// # Safety
/// `set` must be a live handle, `rss` must point to `m` doubles and
/// `x1` / `x2` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfp_knn_locate(
    set: *const MfpTrainingSet,
    rss: *const f64,
    m: usize,
    kappa: usize,
    x1: *mut f64,
    x2: *mut f64,
) -> MfpStatus {
    guard(|| {
        let set = set.as_ref().ok_or_else(|| null("training set"))?;
        let (x1, x2) = (out_arg(x1, "x1")?, out_arg(x2, "x2")?);
        let p = mimo_fp::knn_locate(&set.0, &rss_arg(rss, m)?, &KnnConfig::default().with_kappa(kappa))?;
        *x1 = p.x1;
        *x2 = p.x2;
        Ok(())
    })
}

/// Mean path gain (dB) at distance `d` metres under the default
/// three-slope urban model.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfp_mean_path_gain_db(d: f64, out: *mut f64) -> MfpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = mimo_fp::mean_path_gain_db(d, &PathLossModel::three_slope_urban())?;
        Ok(())
    })
}
