//! C ABI for the training engine: opaque handles, integer status codes, and
//! a thread-local last-error message. All entry points are panic-safe.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use sparsegrow::dst::{flops_estimate, FlopsArch, GrowthStrategy, PruneGrowSchedule};
use sparsegrow::exp::{parse_config, run_flops_report, run_training, ExperimentConfig, TrainOutcome};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullArgument = 1,
    MissingData = 2,
    InfeasibleSparsity = 3,
    NumericFailure = 4,
    InvalidConfig = 5,
    InvalidUtf8 = 6,
    Internal = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn status_of(e: &sparsegrow::exp::ExpError) -> SgStatus {
    match e.exit_code() {
        2 => SgStatus::MissingData,
        3 => SgStatus::InfeasibleSparsity,
        4 => SgStatus::NumericFailure,
        _ => SgStatus::InvalidConfig,
    }
}

fn guarded<F: FnOnce() -> SgStatus>(f: F) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            SgStatus::Internal
        }
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, SgStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(SgStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        SgStatus::InvalidUtf8
    })
}

/// Opaque experiment configuration handle.
pub struct SgConfig {
    inner: ExperimentConfig,
}

/// Opaque training-result handle.
pub struct SgTrainResult {
    outcome: TrainOutcome,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn sg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let message = e.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Parse a config document (the same flat key-value text the CLI reads) into
/// a new handle stored in `*out`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_config_parse(
    text: *const c_char,
    out: *mut *mut SgConfig,
) -> SgStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return SgStatus::NullArgument;
        }
        let text = match cstr_arg(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_config(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SgConfig { inner }));
                SgStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Free a config handle. Null is a no-op.
///
/// # Safety
/// `config` must have come from `sg_config_parse` and not been freed.
#[no_mangle]
pub unsafe extern "C" fn sg_config_free(config: *mut SgConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Override the config seed.
///
/// # Safety
/// `config` must be a live handle from `sg_config_parse`.
#[no_mangle]
pub unsafe extern "C" fn sg_config_set_seed(config: *mut SgConfig, seed: u64) -> SgStatus {
    guarded(|| {
        let Some(config) = config.as_mut() else {
            set_error("null config");
            return SgStatus::NullArgument;
        };
        config.inner.seed = seed;
        SgStatus::Ok
    })
}

/// Redirect the run's output directory.
///
/// # Safety
/// `config` must be a live handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sg_config_set_output_dir(
    config: *mut SgConfig,
    dir: *const c_char,
) -> SgStatus {
    guarded(|| {
        let Some(config) = config.as_mut() else {
            set_error("null config");
            return SgStatus::NullArgument;
        };
        let dir = match cstr_arg(dir) {
            Ok(d) => d,
            Err(s) => return s,
        };
        config.inner.output_dir = PathBuf::from(dir);
        SgStatus::Ok
    })
}

/// Run training to completion; on success `*out` holds a result handle and
/// `metrics.csv` / `model.bin` are written to the config's output directory.
///
/// # Safety
/// `config` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_train(
    config: *const SgConfig,
    out: *mut *mut SgTrainResult,
) -> SgStatus {
    guarded(|| {
        let Some(config) = config.as_ref() else {
            set_error("null config");
            return SgStatus::NullArgument;
        };
        if out.is_null() {
            set_error("null output pointer");
            return SgStatus::NullArgument;
        }
        match run_training(&config.inner) {
            Ok(outcome) => {
                *out = Box::into_raw(Box::new(SgTrainResult { outcome }));
                SgStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Final test accuracy of a completed run.
///
/// # Safety
/// `result` must be a live handle from `sg_train`.
#[no_mangle]
pub unsafe extern "C" fn sg_train_result_final_accuracy(result: *const SgTrainResult) -> f64 {
    result
        .as_ref()
        .map(|r| r.outcome.final_test_acc as f64)
        .unwrap_or(f64::NAN)
}

/// Number of prune-grow rounds the run executed.
///
/// # Safety
/// `result` must be a live handle from `sg_train`.
#[no_mangle]
pub unsafe extern "C" fn sg_train_result_rounds(result: *const SgTrainResult) -> u64 {
    result.as_ref().map(|r| r.outcome.total_rounds as u64).unwrap_or(0)
}

/// Number of per-epoch metric records.
///
/// # Safety
/// `result` must be a live handle from `sg_train`.
#[no_mangle]
pub unsafe extern "C" fn sg_train_result_epochs(result: *const SgTrainResult) -> u64 {
    result.as_ref().map(|r| r.outcome.records.len() as u64).unwrap_or(0)
}

/// Free a training-result handle. Null is a no-op.
///
/// # Safety
/// `result` must have come from `sg_train` and not been freed.
#[no_mangle]
pub unsafe extern "C" fn sg_train_result_free(result: *mut SgTrainResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Write the analytic FLOPs report (`flops.csv`) for a config.
///
/// # Safety
/// `config` must be a live handle from `sg_config_parse`.
#[no_mangle]
pub unsafe extern "C" fn sg_flops_report(config: *const SgConfig) -> SgStatus {
    guarded(|| {
        let Some(config) = config.as_ref() else {
            set_error("null config");
            return SgStatus::NullArgument;
        };
        match run_flops_report(&config.inner) {
            Ok(_) => SgStatus::Ok,
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Training-FLOPs ratio of guided uniform growth against the dense-gradient
/// baseline on the built-in ImageNet-scale residual network, at the given
/// sparsity, update period, and subset factor. Writes the ratio to `*out`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_resnet50_flops_ratio(
    sparsity: f64,
    update_period: u64,
    gamma: f64,
    out: *mut f64,
) -> SgStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return SgStatus::NullArgument;
        }
        let arch = FlopsArch::resnet50();
        let steps = 100_000usize;
        let schedule = PruneGrowSchedule {
            period: update_period.max(1) as usize,
            t_end: steps,
            alpha: 0.2,
            gamma: gamma as sparsegrow::Real,
        };
        let run = |strategy| {
            flops_estimate(
                &arch,
                strategy,
                &schedule,
                sparsity as sparsegrow::Real,
                steps,
                128,
            )
        };
        match (run(GrowthStrategy::GseUniform), run(GrowthStrategy::RiglDense)) {
            (Ok(gse), Ok(rigl)) => {
                *out = gse.train_total / rigl.train_total;
                SgStatus::Ok
            }
            (Err(e), _) | (_, Err(e)) => {
                set_error(&e.to_string());
                SgStatus::InfeasibleSparsity
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_a_valid_cstring() {
        let v = unsafe { CStr::from_ptr(sg_version()) };
        assert!(!v.to_str().unwrap().is_empty());
    }

    #[test]
    fn null_arguments_are_rejected() {
        unsafe {
            let mut out: *mut SgConfig = std::ptr::null_mut();
            assert_eq!(sg_config_parse(std::ptr::null(), &mut out), SgStatus::NullArgument);
            assert_eq!(
                sg_config_parse(b"x\0".as_ptr() as *const c_char, std::ptr::null_mut()),
                SgStatus::NullArgument
            );
        }
    }
}
