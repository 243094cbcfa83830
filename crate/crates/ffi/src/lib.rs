//! C ABI over `fedmia`.
//!
//! Every fallible function returns a [`FedmiaStatus`] and writes its result
//! through an out-pointer. On failure, [`fedmia_last_error_message`] describes
//! the error on the calling thread. Handles are opaque; each `*_load` or
//! `*_parse` is paired with a `*_free`. Strings handed out by the library are
//! released with [`fedmia_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fedmia::attack::attacker_advantage;
use fedmia::experiment::{results_to_string, run_experiment, write_results, ExperimentConfig};
use fedmia::numerics::{checkpoint, forward, ModelParams, Tensor};
use fedmia::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FedmiaStatus {
    Ok = 0,
    Input = 1,
    Config = 2,
    Format = 3,
    Numeric = 4,
    Shape = 5,
    Io = 6,
    NullArgument = 7,
    Panic = 8,
}

impl From<&Error> for FedmiaStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Input(_) => FedmiaStatus::Input,
            Error::Config(_) => FedmiaStatus::Config,
            Error::Format { .. } | Error::Csv(_) => FedmiaStatus::Format,
            Error::Numeric(_) => FedmiaStatus::Numeric,
            Error::Shape(_) => FedmiaStatus::Shape,
            Error::Io(_) => FedmiaStatus::Io,
        }
    }
}

/// Experiment configuration handle.
pub struct FedmiaConfig {
    inner: ExperimentConfig,
}

/// Trained classifier handle.
pub struct FedmiaModel {
    params: ModelParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `body`, translating errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FedmiaStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => FedmiaStatus::Ok,
        Ok(Err(Failure::Null(arg))) => {
            set_last_error(format!("`{arg}` must not be null"));
            FedmiaStatus::NullArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            FedmiaStatus::from(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            FedmiaStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &'static str) -> Result<*const T, Failure> {
    if p.is_null() {
        Err(Failure::Null(name))
    } else {
        Ok(p)
    }
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    let p = non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::Input(format!("`{name}` is not valid UTF-8"))))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::Lib(Error::Input("output contains a NUL byte".into())))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fedmia_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null if the last call
/// succeeded. Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn fedmia_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fedmia_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Reads a config file. Relative paths inside it resolve against its directory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn fedmia_config_load(
    path: *const c_char,
    out: *mut *mut FedmiaConfig,
) -> FedmiaStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        non_null(out, "out")?;
        let inner = ExperimentConfig::from_file(path)?;
        *out = Box::into_raw(Box::new(FedmiaConfig { inner }));
        Ok(())
    })
}

/// Parses config text. `base_dir` may be null, meaning the working directory.
///
/// # Safety
/// `text` and a non-null `base_dir` must be NUL-terminated strings; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn fedmia_config_parse(
    text: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut FedmiaConfig,
) -> FedmiaStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let base = if base_dir.is_null() {
            "."
        } else {
            str_arg(base_dir, "base_dir")?
        };
        non_null(out, "out")?;
        let inner = ExperimentConfig::parse(text, Path::new(base))?;
        *out = Box::into_raw(Box::new(FedmiaConfig { inner }));
        Ok(())
    })
}

/// Replaces the seed list of `config`.
///
/// # Safety
/// `config` must be a live handle and `seeds` must point to `n` values.
#[no_mangle]
pub unsafe extern "C" fn fedmia_config_set_seeds(
    config: *mut FedmiaConfig,
    seeds: *const u64,
    n: usize,
) -> FedmiaStatus {
    guard(|| {
        let cfg = &mut *non_null(config, "config")?.cast_mut();
        let seeds = std::slice::from_raw_parts(non_null(seeds, "seeds")?, n).to_vec();
        let mut next = cfg.inner.clone();
        next.seeds = seeds;
        next.validate()?;
        cfg.inner = next;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fedmia_config_free(config: *mut FedmiaConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the sweep and returns the results CSV as a new string.
///
/// # Safety
/// `config` must be a live handle and `out_csv` writable. Free the string
/// with [`fedmia_string_free`].
#[no_mangle]
pub unsafe extern "C" fn fedmia_run_experiment(
    config: *const FedmiaConfig,
    out_csv: *mut *mut c_char,
) -> FedmiaStatus {
    guard(|| {
        let cfg = &*non_null(config, "config")?;
        non_null(out_csv, "out_csv")?;
        let rows = run_experiment(&cfg.inner)?;
        *out_csv = into_c_string(results_to_string(&rows)?)?;
        Ok(())
    })
}

/// Runs the sweep and writes the results CSV to `path`.
///
/// # Safety
/// `config` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fedmia_run_experiment_to_file(
    config: *const FedmiaConfig,
    path: *const c_char,
) -> FedmiaStatus {
    guard(|| {
        let cfg = &*non_null(config, "config")?;
        let path = str_arg(path, "path")?;
        let rows = run_experiment(&cfg.inner)?;
        let file = std::fs::File::create(path).map_err(Error::from)?;
        write_results(&rows, file)?;
        Ok(())
    })
}

/// Loads a model checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fedmia_model_load(path: *const c_char, out: *mut *mut FedmiaModel) -> FedmiaStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        non_null(out, "out")?;
        let params = checkpoint::load(path)?;
        *out = Box::into_raw(Box::new(FedmiaModel { params }));
        Ok(())
    })
}

/// Writes `model` as a checkpoint.
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fedmia_model_save(model: *const FedmiaModel, path: *const c_char) -> FedmiaStatus {
    guard(|| {
        let model = &*non_null(model, "model")?;
        checkpoint::save(&model.params, str_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fedmia_model_free(model: *mut FedmiaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input width and class count of `model`.
///
/// # Safety
/// `model` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fedmia_model_dims(
    model: *const FedmiaModel,
    input_dim: *mut usize,
    class_count: *mut usize,
) -> FedmiaStatus {
    guard(|| {
        let model = &*non_null(model, "model")?;
        non_null(input_dim, "input_dim")?;
        non_null(class_count, "class_count")?;
        *input_dim = model.params.input_dim();
        *class_count = model.params.output_dim();
        Ok(())
    })
}

/// Class probabilities for `rows` inputs of width `cols` (row-major).
///
/// `out_probs` must hold `rows * class_count` values.
///
/// # Safety
/// `model` must be a live handle, `features` must point to `rows * cols`
/// values and `out_probs` to `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn fedmia_model_predict(
    model: *const FedmiaModel,
    features: *const f64,
    rows: usize,
    cols: usize,
    out_probs: *mut f64,
    out_len: usize,
) -> FedmiaStatus {
    guard(|| {
        let model = &*non_null(model, "model")?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Input("rows * cols overflows".into()))?;
        let data = std::slice::from_raw_parts(non_null(features, "features")?, n).to_vec();
        let out = non_null(out_probs, "out_probs")?.cast_mut();
        let need = rows * model.params.output_dim();
        if out_len < need {
            return Err(Error::Input(format!("out_probs holds {out_len} values, {need} needed")).into());
        }
        let probs = forward(&model.params, &Tensor::from_vec(rows, cols, data)?)?;
        std::slice::from_raw_parts_mut(out, need).copy_from_slice(probs.data());
        Ok(())
    })
}

/// Batch-wise accuracy minus sample-wise accuracy; both must lie in `[0, 1]`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fedmia_attacker_advantage(
    batchwise: f64,
    samplewise: f64,
    out: *mut f64,
) -> FedmiaStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = attacker_advantage(batchwise, samplewise)?;
        Ok(())
    })
}
