//! C ABI over the genclass engine: opaque handles, integer status codes,
//! and a thread-local last-error message.
//!
//! Every function returns a `GcStatus`; on failure the handle outputs are
//! untouched and `gc_last_error` yields a UTF-8 description valid until the
//! next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use genclass::checkpoint::Checkpoint;
use genclass::config::ConfigFile;
use genclass::data::{make_synthetic, Dataset, Precision, SyntheticSpec};
use genclass::inference::{evaluate_gzsl, evaluate_zsl};
use genclass::trainer::{train, TrainConfig};
use genclass::Error;

/// Status codes mirroring the CLI's exit classes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcStatus {
    /// Success.
    Ok = 0,
    /// Invalid configuration or arguments.
    Config = 1,
    /// Data or file-format problem.
    Data = 2,
    /// Numeric abort during training.
    Numeric = 3,
    /// Null pointer or malformed string argument.
    NullArgument = 4,
}

/// A loaded dataset (opaque).
pub struct GcDataset(Dataset);

/// A training configuration (opaque).
pub struct GcTrainConfig(TrainConfig);

/// A trained model: generator, critic, and classifier (opaque).
pub struct GcModel(Checkpoint);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: GcStatus, message: &str) -> GcStatus {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
    status
}

fn fail_error(err: Error) -> GcStatus {
    let status = match err.exit_code() {
        1 => GcStatus::Config,
        3 => GcStatus::Numeric,
        _ => GcStatus::Data,
    };
    fail(status, &err.to_string())
}

/// Message for the most recent failure on this thread; empty string if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn str_arg<'a>(ptr: *const c_char) -> Result<&'a str, GcStatus> {
    if ptr.is_null() {
        return Err(fail(GcStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(GcStatus::NullArgument, "string argument is not valid UTF-8"))
}

fn out_arg<'a, T>(ptr: *mut *mut T) -> Result<&'a mut *mut T, GcStatus> {
    if ptr.is_null() {
        return Err(fail(GcStatus::NullArgument, "null output pointer"));
    }
    Ok(unsafe { &mut *ptr })
}

fn handle_arg<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, GcStatus> {
    if ptr.is_null() {
        return Err(fail(GcStatus::NullArgument, &format!("null {name} handle")));
    }
    Ok(unsafe { &*ptr })
}

/// Generates a synthetic dataset (see `gc_dataset_load` for real data).
///
/// # Safety
/// `out` must be a valid pointer to a `GcDataset*` slot.
#[no_mangle]
pub unsafe extern "C" fn gc_dataset_synth(
    seen_classes: usize,
    unseen_classes: usize,
    attribute_dim: usize,
    feature_dim: usize,
    train_per_class: usize,
    test_per_class: usize,
    noise_scale: f64,
    seed: u64,
    out: *mut *mut GcDataset,
) -> GcStatus {
    let out = match out_arg(out) {
        Ok(o) => o,
        Err(s) => return s,
    };
    let spec = SyntheticSpec {
        seen_classes,
        unseen_classes,
        d_a: attribute_dim,
        d_x: feature_dim,
        train_per_class,
        test_per_class,
        noise_scale,
        seed,
    };
    match make_synthetic(&spec) {
        Ok(ds) => {
            *out = Box::into_raw(Box::new(GcDataset(ds)));
            GcStatus::Ok
        }
        Err(e) => fail_error(e),
    }
}

/// Loads a dataset directory written in the on-disk manifest format.
///
/// # Safety
/// `dir` must be a valid NUL-terminated string; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn gc_dataset_load(
    dir: *const c_char,
    out: *mut *mut GcDataset,
) -> GcStatus {
    let (dir, out) = match (str_arg(dir), out_arg(out)) {
        (Ok(d), Ok(o)) => (d, o),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    match Dataset::load(Path::new(dir)) {
        Ok(ds) => {
            *out = Box::into_raw(Box::new(GcDataset(ds)));
            GcStatus::Ok
        }
        Err(e) => fail_error(e),
    }
}

/// Frees a dataset handle; a null pointer is a no-op.
///
/// # Safety
/// `dataset` must be null or a pointer from `gc_dataset_*`, freed once.
#[no_mangle]
pub unsafe extern "C" fn gc_dataset_free(dataset: *mut GcDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Creates a training configuration with library defaults.
///
/// # Safety
/// `out` must be a valid pointer to a `GcTrainConfig*` slot.
#[no_mangle]
pub unsafe extern "C" fn gc_train_config_new(out: *mut *mut GcTrainConfig) -> GcStatus {
    let out = match out_arg(out) {
        Ok(o) => o,
        Err(s) => return s,
    };
    *out = Box::into_raw(Box::new(GcTrainConfig(TrainConfig::default())));
    GcStatus::Ok
}

/// Sets one configuration key, using the same closed schema as config files
/// (e.g. "iterations", "learning_rate", "hidden_generator").
///
/// # Safety
/// `config` must be a live handle; `key` and `value` valid strings.
#[no_mangle]
pub unsafe extern "C" fn gc_train_config_set(
    config: *mut GcTrainConfig,
    key: *const c_char,
    value: *const c_char,
) -> GcStatus {
    if config.is_null() {
        return fail(GcStatus::NullArgument, "null config handle");
    }
    let (key, value) = match (str_arg(key), str_arg(value)) {
        (Ok(k), Ok(v)) => (k, v),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    let text = format!("{key} = {value}\n");
    let parsed = match ConfigFile::from_text(&text, Path::new("<gc_train_config_set>")) {
        Ok(p) => p,
        Err(e) => return fail_error(e),
    };
    match parsed.apply_train(&mut (*config).0) {
        Ok(()) => GcStatus::Ok,
        Err(e) => fail_error(e),
    }
}

/// Frees a configuration handle; a null pointer is a no-op.
///
/// # Safety
/// `config` must be null or a pointer from `gc_train_config_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn gc_train_config_free(config: *mut GcTrainConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Trains generator, critic, and classifier on the dataset.
///
/// # Safety
/// `config` and `dataset` must be live handles; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn gc_train(
    config: *const GcTrainConfig,
    dataset: *const GcDataset,
    out: *mut *mut GcModel,
) -> GcStatus {
    let (config, dataset, out) = match (
        handle_arg(config, "config"),
        handle_arg(dataset, "dataset"),
        out_arg(out),
    ) {
        (Ok(c), Ok(d), Ok(o)) => (c, d, o),
        (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
    };
    match train(&config.0, &dataset.0) {
        Ok(outcome) => {
            *out = Box::into_raw(Box::new(GcModel(outcome.checkpoint)));
            GcStatus::Ok
        }
        Err(e) => fail_error(e),
    }
}

/// Writes the model as a checkpoint directory.
///
/// # Safety
/// `model` must be a live handle; `dir` a valid string.
#[no_mangle]
pub unsafe extern "C" fn gc_model_save(model: *const GcModel, dir: *const c_char) -> GcStatus {
    let (model, dir) = match (handle_arg(model, "model"), str_arg(dir)) {
        (Ok(m), Ok(d)) => (m, d),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    match model.0.save(Path::new(dir), Precision::Double) {
        Ok(()) => GcStatus::Ok,
        Err(e) => fail_error(e),
    }
}

/// Loads a checkpoint directory written by `gc_model_save` or the CLI.
///
/// # Safety
/// `dir` must be a valid string; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn gc_model_load(dir: *const c_char, out: *mut *mut GcModel) -> GcStatus {
    let (dir, out) = match (str_arg(dir), out_arg(out)) {
        (Ok(d), Ok(o)) => (d, o),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    match Checkpoint::load(Path::new(dir)) {
        Ok(cp) => {
            *out = Box::into_raw(Box::new(GcModel(cp)));
            GcStatus::Ok
        }
        Err(e) => fail_error(e),
    }
}

/// Frees a model handle; a null pointer is a no-op.
///
/// # Safety
/// `model` must be null or a pointer from `gc_train`/`gc_model_load`.
#[no_mangle]
pub unsafe extern "C" fn gc_model_free(model: *mut GcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Zero-shot evaluation: mean per-class top-1 accuracy over unseen classes.
///
/// # Safety
/// `model` and `dataset` must be live handles; `accuracy` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn gc_eval_zsl(
    model: *const GcModel,
    dataset: *const GcDataset,
    n_g: usize,
    seed: u64,
    accuracy: *mut f64,
) -> GcStatus {
    let (model, dataset) = match (handle_arg(model, "model"), handle_arg(dataset, "dataset")) {
        (Ok(m), Ok(d)) => (m, d),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    if accuracy.is_null() {
        return fail(GcStatus::NullArgument, "null accuracy output");
    }
    match evaluate_zsl(&model.0.generator, &model.0.classifier, &dataset.0, n_g, seed, "") {
        Ok(report) => {
            *accuracy = report.headline;
            GcStatus::Ok
        }
        Err(e) => fail_error(e),
    }
}

/// Generalized zero-shot evaluation; writes U, S, and the harmonic mean H.
///
/// # Safety
/// `model` and `dataset` must be live handles; `u`, `s`, `h` valid slots.
#[no_mangle]
pub unsafe extern "C" fn gc_eval_gzsl(
    model: *const GcModel,
    dataset: *const GcDataset,
    n_g: usize,
    seed: u64,
    u: *mut f64,
    s: *mut f64,
    h: *mut f64,
) -> GcStatus {
    let (model, dataset) = match (handle_arg(model, "model"), handle_arg(dataset, "dataset")) {
        (Ok(m), Ok(d)) => (m, d),
        (Err(st), _) | (_, Err(st)) => return st,
    };
    if u.is_null() || s.is_null() || h.is_null() {
        return fail(GcStatus::NullArgument, "null metric output");
    }
    match evaluate_gzsl(&model.0.generator, &model.0.classifier, &dataset.0, n_g, seed, "") {
        Ok(report) => {
            let (uu, ss) = report.unseen_seen.expect("gzsl report carries U and S");
            *u = uu;
            *s = ss;
            *h = report.headline;
            GcStatus::Ok
        }
        Err(e) => fail_error(e),
    }
}

// keep the pointer type out of the generated header's dead-code warnings
const _: () = {
    let _ = ptr::null::<GcDataset>;
};

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn last_error_string() -> String {
        unsafe { CStr::from_ptr(gc_last_error()).to_string_lossy().into_owned() }
    }

    unsafe fn tiny_dataset() -> *mut GcDataset {
        let mut ds: *mut GcDataset = ptr::null_mut();
        let status = gc_dataset_synth(4, 2, 3, 5, 6, 3, 0.05, 1, &mut ds);
        assert_eq!(status, GcStatus::Ok);
        ds
    }

    unsafe fn tiny_config() -> *mut GcTrainConfig {
        let mut cfg: *mut GcTrainConfig = ptr::null_mut();
        assert_eq!(gc_train_config_new(&mut cfg), GcStatus::Ok);
        for (k, v) in [
            ("iterations", "2"),
            ("batch_size", "8"),
            ("hidden_generator", "6"),
            ("hidden_critic", "6"),
            ("hidden_classifier", "6"),
        ] {
            let (k, v) = (cstr(k), cstr(v));
            assert_eq!(gc_train_config_set(cfg, k.as_ptr(), v.as_ptr()), GcStatus::Ok);
        }
        cfg
    }

    #[test]
    fn train_save_load_eval_roundtrip() {
        unsafe {
            let ds = tiny_dataset();
            let cfg = tiny_config();
            let mut model: *mut GcModel = ptr::null_mut();
            assert_eq!(gc_train(cfg, ds, &mut model), GcStatus::Ok);

            let dir = tempfile::tempdir().unwrap();
            let path = cstr(dir.path().join("ckpt").to_str().unwrap());
            assert_eq!(gc_model_save(model, path.as_ptr()), GcStatus::Ok);

            let mut loaded: *mut GcModel = ptr::null_mut();
            assert_eq!(gc_model_load(path.as_ptr(), &mut loaded), GcStatus::Ok);

            let mut acc = -1.0;
            assert_eq!(gc_eval_zsl(loaded, ds, 3, 0, &mut acc), GcStatus::Ok);
            assert!((0.0..=1.0).contains(&acc));

            let (mut u, mut s, mut h) = (-1.0, -1.0, -1.0);
            assert_eq!(gc_eval_gzsl(model, ds, 3, 0, &mut u, &mut s, &mut h), GcStatus::Ok);
            assert!((0.0..=1.0).contains(&h));
            let expected = if u + s > 0.0 { 2.0 * u * s / (u + s) } else { 0.0 };
            assert!((h - expected).abs() < 1e-12);

            gc_model_free(model);
            gc_model_free(loaded);
            gc_train_config_free(cfg);
            gc_dataset_free(ds);
        }
    }

    #[test]
    fn bad_config_key_reports_config_status() {
        unsafe {
            let mut cfg: *mut GcTrainConfig = ptr::null_mut();
            assert_eq!(gc_train_config_new(&mut cfg), GcStatus::Ok);
            let (k, v) = (cstr("no_such_key"), cstr("1"));
            assert_eq!(gc_train_config_set(cfg, k.as_ptr(), v.as_ptr()), GcStatus::Config);
            assert!(last_error_string().contains("no_such_key"));
            gc_train_config_free(cfg);
        }
    }

    #[test]
    fn invalid_spec_reports_config_status() {
        unsafe {
            let mut ds: *mut GcDataset = ptr::null_mut();
            let status = gc_dataset_synth(1, 2, 3, 5, 6, 3, 0.05, 1, &mut ds);
            assert_eq!(status, GcStatus::Config);
            assert!(last_error_string().contains(">= 2"));
            assert!(ds.is_null());
        }
    }

    #[test]
    fn missing_directory_reports_data_status() {
        unsafe {
            let mut ds: *mut GcDataset = ptr::null_mut();
            let dir = cstr("/definitely/not/here");
            assert_eq!(gc_dataset_load(dir.as_ptr(), &mut ds), GcStatus::Data);
            assert!(last_error_string().contains("manifest"));
        }
    }

    #[test]
    fn null_arguments_rejected() {
        unsafe {
            assert_eq!(
                gc_dataset_load(ptr::null(), ptr::null_mut()),
                GcStatus::NullArgument
            );
            let mut acc = 0.0;
            assert_eq!(
                gc_eval_zsl(ptr::null(), ptr::null(), 1, 0, &mut acc),
                GcStatus::NullArgument
            );
            assert_eq!(
                gc_train(ptr::null(), ptr::null(), ptr::null_mut()),
                GcStatus::NullArgument
            );
            // frees tolerate null
            gc_dataset_free(ptr::null_mut());
            gc_model_free(ptr::null_mut());
            gc_train_config_free(ptr::null_mut());
        }
    }
}
