//! C ABI over the mixuplr library.
//!
//! Conventions: opaque handles created and freed by this library, status
//! codes on every fallible call, caller-allocated output buffers, and a
//! thread-local message retrievable via `mixuplr_last_error_message` after
//! any non-OK status. No call unwinds across the FFI boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use mixuplr::attack::fgsm;
use mixuplr::checkpoint::{read_checkpoint, save_checkpoint};
use mixuplr::error::Error;
use mixuplr::experiment::{
    cmd_ablate_zeta, cmd_attack, cmd_audit, cmd_plot, cmd_train, ExperimentConfig,
};
use mixuplr::lipschitz::{estimate_function_lipschitz, DomainSampler, DyKind, MlpFunction};
use mixuplr::net::{forward, MlpSpec, ParamVector};
use mixuplr::numeric::softmax;
use mixuplr::rng::RngState;
use mixuplr::tensor::Tensor;

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixuplrStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Arguments or configuration outside the valid domain.
    InvalidArgument = 2,
    /// File could not be read, written, or decoded.
    IoError = 3,
    /// The computation itself failed.
    RuntimeError = 4,
    /// A panic was caught at the boundary.
    Panic = 5,
}

/// Opaque handle to a loaded model (architecture plus parameters).
pub struct MixuplrModel {
    spec: MlpSpec,
    params: ParamVector,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_from(err: &Error) -> MixuplrStatus {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => MixuplrStatus::InvalidArgument,
        Error::Io(_) | Error::Checkpoint(_) => MixuplrStatus::IoError,
        _ => MixuplrStatus::RuntimeError,
    }
}

fn guarded(body: impl FnOnce() -> MixuplrStatus) -> MixuplrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("panic inside mixuplr");
            MixuplrStatus::Panic
        }
    }
}

fn fail(err: &Error) -> MixuplrStatus {
    set_last_error(&err.to_string());
    status_from(err)
}

/// Last error message for this thread; valid until the next failing call on
/// the same thread. Never null.
#[no_mangle]
pub extern "C" fn mixuplr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mixuplr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, MixuplrStatus> {
    if ptr.is_null() {
        set_last_error("null path");
        return Err(MixuplrStatus::NullArgument);
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_last_error("path is not valid UTF-8");
            Err(MixuplrStatus::InvalidArgument)
        }
    }
}

/// Loads a model checkpoint. On success `*out` owns the handle; release it
/// with `mixuplr_model_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mixuplr_model_load(
    path: *const c_char,
    out: *mut *mut MixuplrModel,
) -> MixuplrStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null output handle");
            return MixuplrStatus::NullArgument;
        }
        let path = match unsafe { path_arg(path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        match read_checkpoint(&path) {
            Ok((spec, params)) => {
                let handle = Box::new(MixuplrModel { spec, params });
                unsafe { *out = Box::into_raw(handle) };
                MixuplrStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Writes the model to a checkpoint file.
///
/// # Safety
/// `model` must come from `mixuplr_model_load` and `path` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mixuplr_model_save(
    model: *const MixuplrModel,
    path: *const c_char,
) -> MixuplrStatus {
    guarded(|| {
        let Some(model) = (unsafe { model.as_ref() }) else {
            set_last_error("null model");
            return MixuplrStatus::NullArgument;
        };
        let path = match unsafe { path_arg(path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        match save_checkpoint(&path, &model.spec, &model.params) {
            Ok(()) => MixuplrStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Releases a model handle; a null pointer is a no-op.
///
/// # Safety
/// `model` must be null or a pointer returned by `mixuplr_model_load` that
/// has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn mixuplr_model_free(model: *mut MixuplrModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mixuplr_model_input_dim(
    model: *const MixuplrModel,
    out: *mut usize,
) -> MixuplrStatus {
    guarded(|| {
        let (Some(model), Some(out)) = (unsafe { model.as_ref() }, unsafe { out.as_mut() })
        else {
            set_last_error("null argument");
            return MixuplrStatus::NullArgument;
        };
        *out = model.spec.input_dim();
        MixuplrStatus::Ok
    })
}

/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mixuplr_model_output_dim(
    model: *const MixuplrModel,
    out: *mut usize,
) -> MixuplrStatus {
    guarded(|| {
        let (Some(model), Some(out)) = (unsafe { model.as_ref() }, unsafe { out.as_mut() })
        else {
            set_last_error("null argument");
            return MixuplrStatus::NullArgument;
        };
        *out = model.spec.output_dim();
        MixuplrStatus::Ok
    })
}

unsafe fn tensor_arg(
    data: *const f64,
    n_rows: usize,
    n_cols: usize,
) -> Result<Tensor, MixuplrStatus> {
    if data.is_null() {
        set_last_error("null data pointer");
        return Err(MixuplrStatus::NullArgument);
    }
    let slice = unsafe { std::slice::from_raw_parts(data, n_rows * n_cols) };
    Tensor::new(vec![n_rows, n_cols], slice.to_vec()).map_err(|e| {
        set_last_error(&e.to_string());
        MixuplrStatus::InvalidArgument
    })
}

/// Softmax class probabilities for a row-major batch of `n_rows x
/// n_features` inputs. `out_probs` must hold `n_rows * output_dim` doubles.
///
/// # Safety
/// `model` must be a live handle; `features` and `out_probs` must point to
/// buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn mixuplr_model_predict_probs(
    model: *const MixuplrModel,
    features: *const f64,
    n_rows: usize,
    n_features: usize,
    out_probs: *mut f64,
) -> MixuplrStatus {
    guarded(|| {
        let Some(model) = (unsafe { model.as_ref() }) else {
            set_last_error("null model");
            return MixuplrStatus::NullArgument;
        };
        if out_probs.is_null() {
            set_last_error("null output buffer");
            return MixuplrStatus::NullArgument;
        }
        let x = match unsafe { tensor_arg(features, n_rows, n_features) } {
            Ok(t) => t,
            Err(status) => return status,
        };
        let logits = match forward(&model.spec, &model.params, &x) {
            Ok(l) => l,
            Err(e) => return fail(&e),
        };
        let s = model.spec.output_dim();
        let out = unsafe { std::slice::from_raw_parts_mut(out_probs, n_rows * s) };
        for r in 0..n_rows {
            let p = softmax(logits.row(r)).expect("finite logits");
            out[r * s..(r + 1) * s].copy_from_slice(&p);
        }
        MixuplrStatus::Ok
    })
}

/// Single-step FGSM adversarial examples against one-hot labels.
/// `out_x_adv` must hold `n_rows * n_features` doubles.
///
/// # Safety
/// All pointers must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn mixuplr_model_fgsm(
    model: *const MixuplrModel,
    features: *const f64,
    labels_onehot: *const f64,
    n_rows: usize,
    n_features: usize,
    n_classes: usize,
    epsilon: f64,
    out_x_adv: *mut f64,
) -> MixuplrStatus {
    guarded(|| {
        let Some(model) = (unsafe { model.as_ref() }) else {
            set_last_error("null model");
            return MixuplrStatus::NullArgument;
        };
        if out_x_adv.is_null() {
            set_last_error("null output buffer");
            return MixuplrStatus::NullArgument;
        }
        let x = match unsafe { tensor_arg(features, n_rows, n_features) } {
            Ok(t) => t,
            Err(status) => return status,
        };
        let y = match unsafe { tensor_arg(labels_onehot, n_rows, n_classes) } {
            Ok(t) => t,
            Err(status) => return status,
        };
        match fgsm(&model.spec, &model.params, &x, &y, epsilon) {
            Ok(adv) => {
                let out =
                    unsafe { std::slice::from_raw_parts_mut(out_x_adv, n_rows * n_features) };
                out.copy_from_slice(adv.data());
                MixuplrStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Sampled lower estimate of the model's Lipschitz constant (KL over
/// softmax outputs against Euclidean inputs) over the domain spanned by the
/// given points.
///
/// # Safety
/// `domain_points` must hold `n_points * n_features` doubles and `out_k_hat`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mixuplr_model_estimate_lipschitz(
    model: *const MixuplrModel,
    domain_points: *const f64,
    n_points: usize,
    n_features: usize,
    n_pairs: usize,
    seed: u64,
    out_k_hat: *mut f64,
) -> MixuplrStatus {
    guarded(|| {
        let Some(model) = (unsafe { model.as_ref() }) else {
            set_last_error("null model");
            return MixuplrStatus::NullArgument;
        };
        if out_k_hat.is_null() {
            set_last_error("null output pointer");
            return MixuplrStatus::NullArgument;
        }
        let points = match unsafe { tensor_arg(domain_points, n_points, n_features) } {
            Ok(t) => t,
            Err(status) => return status,
        };
        let sampler = match DomainSampler::from_data(&points) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        let f = MlpFunction { spec: &model.spec, params: &model.params };
        let mut rng = RngState::new(seed);
        match estimate_function_lipschitz(&f, &sampler, DyKind::KlSoftmax, n_pairs, &mut rng) {
            Ok(est) => {
                unsafe { *out_k_hat = est.k_hat };
                MixuplrStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

fn run_command(command: &str, config: &Path, out_dir: Option<PathBuf>) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    if let Some(dir) = out_dir {
        cfg.out_dir = dir;
    }
    cfg.validate()?;
    match command {
        "train" => cmd_train(&cfg).map(|_| ()),
        "ablate-zeta" => {
            let zetas = cfg.ablate_zetas.clone();
            cmd_ablate_zeta(&cfg, &zetas)
        }
        "attack" => {
            let eps = cfg.attack_eps.clone();
            cmd_attack(&cfg, &eps).map(|_| ())
        }
        "audit" => cmd_audit(&cfg),
        "plot" => cmd_plot(&cfg),
        other => Err(Error::InvalidArgument(format!("unknown command `{other}`"))),
    }
}

/// Runs one experiment command ("train", "ablate-zeta", "attack", "audit",
/// "plot") against a config file, writing artifacts to `out_dir` (or the
/// config's own output directory when null).
///
/// # Safety
/// `command` and `config_path` must be NUL-terminated strings; `out_dir`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn mixuplr_run_command(
    command: *const c_char,
    config_path: *const c_char,
    out_dir: *const c_char,
) -> MixuplrStatus {
    guarded(|| {
        if command.is_null() {
            set_last_error("null command");
            return MixuplrStatus::NullArgument;
        }
        let command = match unsafe { CStr::from_ptr(command) }.to_str() {
            Ok(s) => s.to_string(),
            Err(_) => {
                set_last_error("command is not valid UTF-8");
                return MixuplrStatus::InvalidArgument;
            }
        };
        let config = match unsafe { path_arg(config_path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        let out = if out_dir.is_null() {
            None
        } else {
            match unsafe { path_arg(out_dir) } {
                Ok(p) => Some(p),
                Err(status) => return status,
            }
        };
        match run_command(&command, &config, out) {
            Ok(()) => MixuplrStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}
