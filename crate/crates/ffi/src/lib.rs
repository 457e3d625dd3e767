//! C ABI over `dcevae`: load a trained checkpoint and a prepared dataset,
//! run counterfactual prediction, compute effects, and evaluate the
//! closed-form latent covariance of the linear model.
//!
//! Every fallible function returns a [`DcevaeStatus`]. On failure the
//! message is kept per thread and read back with
//! [`dcevae_last_error_message`]. Handles are opaque and must be released
//! with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use dcevae::checkpoint::Checkpoint;
use dcevae::counterfactual::{counterfactual_predict, fairness_gap, Abduction};
use dcevae::data::TabularDataset;
use dcevae::metrics::total_effect_model;
use dcevae::numerics::Rng;
use dcevae::theory::{sigma_star, LinearModelSpec};
use dcevae::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DcevaeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Shape = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// A trained model together with its configuration and attribute partition.
pub struct DcevaeModel {
    checkpoint: Checkpoint,
}

/// A prepared split (`<stem>.csv` plus its sidecar).
pub struct DcevaeDataset {
    data: TabularDataset,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> DcevaeStatus {
    match err {
        Error::Shape { .. } => DcevaeStatus::Shape,
        Error::NonFinite { .. } | Error::Convergence(_) | Error::Singular { .. } => {
            DcevaeStatus::Numerical
        }
        Error::Invalid(_) => DcevaeStatus::InvalidArgument,
        Error::Parse { .. } | Error::Json(_) => DcevaeStatus::Parse,
        Error::Io { .. } => DcevaeStatus::Io,
    }
}

struct Failure(DcevaeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DcevaeStatus::NullPointer, format!("null pointer: {what}"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DcevaeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            DcevaeStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DcevaeStatus::Panic
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            DcevaeStatus::InvalidArgument,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn out_slice<'a>(
    p: *mut f64,
    len: usize,
    need: usize,
    what: &str,
) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(Failure(
            DcevaeStatus::BufferTooSmall,
            format!("{what} holds {len} values, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn pair<'a>(
    model: *const DcevaeModel,
    data: *const DcevaeDataset,
) -> Result<(&'a DcevaeModel, &'a DcevaeDataset), Failure> {
    let model = model.as_ref().ok_or_else(|| null("model"))?;
    let data = data.as_ref().ok_or_else(|| null("dataset"))?;
    model.checkpoint.check_dataset(&data.data)?;
    Ok((model, data))
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to `len` bytes. Returns the length
/// needed including the terminator (1 when there is no error).
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dcevae_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Loads a checkpoint written by `dcevae train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
/// On success `*out` owns a handle to be released with
/// [`dcevae_model_free`].
#[no_mangle]
pub unsafe extern "C" fn dcevae_model_load(
    path: *const c_char,
    out: *mut *mut DcevaeModel,
) -> DcevaeStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let checkpoint = Checkpoint::load(&PathBuf::from(path))?;
        *out = Box::into_raw(Box::new(DcevaeModel { checkpoint }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`dcevae_model_load`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn dcevae_model_free(model: *mut DcevaeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Latent dimension of the model, 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dcevae_model_latent_dim(model: *const DcevaeModel) -> usize {
    model
        .as_ref()
        .map_or(0, |m| m.checkpoint.model.latent_dim())
}

/// Loads `<dir>/<stem>.csv` and its sidecar as written by `dcevae prepare`.
///
/// # Safety
/// `dir` and `stem` must be NUL-terminated strings and `out` a writable
/// pointer. On success `*out` owns a handle to be released with
/// [`dcevae_dataset_free`].
#[no_mangle]
pub unsafe extern "C" fn dcevae_dataset_load(
    dir: *const c_char,
    stem: *const c_char,
    out: *mut *mut DcevaeDataset,
) -> DcevaeStatus {
    guard(|| {
        let dir = c_str(dir, "dir")?;
        let stem = c_str(stem, "stem")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (data, _) = TabularDataset::read_csv(&PathBuf::from(dir), stem)?;
        *out = Box::into_raw(Box::new(DcevaeDataset { data }));
        Ok(())
    })
}

/// # Safety
/// `data` must be null or a handle from [`dcevae_dataset_load`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn dcevae_dataset_free(data: *mut DcevaeDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Number of records, 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dcevae_dataset_len(data: *const DcevaeDataset) -> usize {
    data.as_ref().map_or(0, |d| d.data.len())
}

/// Writes `p(y = 1 | a, u)` and `p(y = 1 | ¬a, u)` for every record, with
/// `u` at the posterior mean. Both buffers need `dcevae_dataset_len`
/// entries; `len` is their capacity.
///
/// # Safety
/// Handles must be live; `y_prob` and `y_prob_cf` must point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dcevae_counterfactual_predict(
    model: *const DcevaeModel,
    data: *const DcevaeDataset,
    y_prob: *mut f64,
    y_prob_cf: *mut f64,
    len: usize,
) -> DcevaeStatus {
    guard(|| {
        let (model, data) = pair(model, data)?;
        let n = data.data.len();
        let factual = out_slice(y_prob, len, n, "y_prob")?;
        let counter = out_slice(y_prob_cf, len, n, "y_prob_cf")?;
        let seed = model.checkpoint.config.seed;
        let cf = counterfactual_predict(
            &model.checkpoint.model,
            &data.data.full_batch(),
            Abduction::Mean,
            &mut Rng::new(seed),
        )?;
        factual.copy_from_slice(&cf.y_prob);
        counter.copy_from_slice(&cf.y_prob_cf);
        Ok(())
    })
}

/// Mean over records of `p(y | do(a = 1), u) − p(y | do(a = 0), u)`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dcevae_total_effect(
    model: *const DcevaeModel,
    data: *const DcevaeDataset,
    out: *mut f64,
) -> DcevaeStatus {
    guard(|| {
        let (model, data) = pair(model, data)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = total_effect_model(&model.checkpoint.model, &data.data)?;
        Ok(())
    })
}

/// Mean `|p(y | a, u) − p(y | ¬a, u)|` over records.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dcevae_fairness_gap(
    model: *const DcevaeModel,
    data: *const DcevaeDataset,
    out: *mut f64,
) -> DcevaeStatus {
    guard(|| {
        let (model, data) = pair(model, data)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = fairness_gap(&model.checkpoint.model, &data.data)?;
        Ok(())
    })
}

/// Closed-form optimal latent covariance of a linear model given as JSON
/// (the `spec.json` format of `dcevae theory`). Writes the row-major
/// `d × d` matrix, latent order `[u_r, u_d]`, into `out` and `d` into
/// `dim`. `len` is the capacity of `out`; on `BUFFER_TOO_SMALL` `*dim` is
/// still set.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string, `out` must point to `len`
/// writable doubles and `dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcevae_sigma_star(
    spec_json: *const c_char,
    out: *mut f64,
    len: usize,
    dim: *mut usize,
) -> DcevaeStatus {
    guard(|| {
        let text = c_str(spec_json, "spec_json")?;
        let dim = dim.as_mut().ok_or_else(|| null("dim"))?;
        let spec: LinearModelSpec = serde_json::from_str(text).map_err(Error::from)?;
        spec.validate()?;
        let sigma = sigma_star(&spec)?;
        *dim = sigma.rows();
        let out = out_slice(out, len, sigma.as_slice().len(), "out")?;
        out.copy_from_slice(sigma.as_slice());
        Ok(())
    })
}
