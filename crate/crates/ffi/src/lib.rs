//! C ABI over the `ecat` library.
//!
//! Every fallible function returns an [`EcatStatus`]; on failure the message
//! is available from [`ecat_last_error_message`] on the same thread until the
//! next call. Objects are opaque handles released with their `_free`
//! function. Panics never cross the boundary; they surface as
//! [`EcatStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ecat::harness::{apply_override, auc, emit, parse_config, run_suite, MetricsFormat, MetricsRow, SuiteKind};
use ecat::trainer::{run_experiment, ExperimentConfig};
use ecat::EcatError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EcatStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Data = 4,
    Numeric = 5,
    Io = 6,
    Format = 7,
    Checkpoint = 8,
    OutOfRange = 9,
    Panic = 10,
}

/// Experiment configuration handle.
pub struct EcatConfig(ExperimentConfig);

/// Metrics table handle.
pub struct EcatMetrics(Vec<MetricsRow>);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &EcatError) -> EcatStatus {
    match e {
        EcatError::Config(_) => EcatStatus::Config,
        EcatError::Data(_) | EcatError::Contract(_) => EcatStatus::Data,
        EcatError::Dimension(_) | EcatError::NonFinite(_) | EcatError::Degenerate(_) | EcatError::Diverged(_) => {
            EcatStatus::Numeric
        }
        EcatError::Io { .. } => EcatStatus::Io,
        EcatError::Format(_) => EcatStatus::Format,
        EcatError::Checkpoint(_) => EcatStatus::Checkpoint,
    }
}

struct Fail(EcatStatus, String);

impl From<EcatError> for Fail {
    fn from(e: EcatError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EcatStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EcatStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EcatStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(EcatStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(EcatStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn ecat_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ecat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New configuration holding the built-in defaults.
#[no_mangle]
pub extern "C" fn ecat_config_default() -> *mut EcatConfig {
    Box::into_raw(Box::new(EcatConfig(ExperimentConfig::default())))
}

/// Parse a TOML configuration document.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ecat_config_from_toml(toml: *const c_char, out: *mut *mut EcatConfig) -> EcatStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = parse_config(str_arg(toml, "toml")?)?;
        cfg.validate()?;
        *out = Box::into_raw(Box::new(EcatConfig(cfg)));
        Ok(())
    })
}

/// Apply a `dotted.key=value` override in place.
///
/// # Safety
/// `cfg` must come from this library; `assignment` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ecat_config_set(cfg: *mut EcatConfig, assignment: *const c_char) -> EcatStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0 = apply_override(&cfg.0, str_arg(assignment, "assignment")?)?;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ecat_config_free(cfg: *mut EcatConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Run one experiment with the configuration's own seed.
///
/// # Safety
/// `cfg` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ecat_run_experiment(cfg: *const EcatConfig, out: *mut *mut EcatMetrics) -> EcatStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let rows = run_experiment(&cfg.0)?;
        *out = Box::into_raw(Box::new(EcatMetrics(rows)));
        Ok(())
    })
}

/// Run a comparison suite (`sample_transfer`, `adaptive_ablation`, or
/// `transfer_setting`) over `n_seeds` seeds.
///
/// # Safety
/// `cfg` must come from this library, `kind` must be NUL-terminated,
/// `seeds` must point to `n_seeds` values, and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ecat_run_suite(
    cfg: *const EcatConfig,
    kind: *const c_char,
    seeds: *const u64,
    n_seeds: usize,
    out: *mut *mut EcatMetrics,
) -> EcatStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let kind: SuiteKind = str_arg(kind, "kind")?.parse()?;
        if seeds.is_null() || out.is_null() {
            return Err(null(if seeds.is_null() { "seeds" } else { "out" }));
        }
        let seeds = std::slice::from_raw_parts(seeds, n_seeds);
        let rows = run_suite(kind, &cfg.0, seeds)?;
        *out = Box::into_raw(Box::new(EcatMetrics(rows)));
        Ok(())
    })
}

/// Number of rows; 0 for a null handle.
///
/// # Safety
/// `m` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ecat_metrics_len(m: *const EcatMetrics) -> usize {
    m.as_ref().map_or(0, |m| m.0.len())
}

/// AUC of row `index`.
///
/// # Safety
/// `m` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ecat_metrics_auc(m: *const EcatMetrics, index: usize, out: *mut f64) -> EcatStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("metrics"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let row =
            m.0.get(index).ok_or_else(|| Fail(EcatStatus::OutOfRange, format!("row {index} of {}", m.0.len())))?;
        *out = row.auc;
        Ok(())
    })
}

/// Write the table as CSV or JSON, chosen by the `.csv` / `.json` extension.
///
/// # Safety
/// `m` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ecat_metrics_write(m: *const EcatMetrics, path: *const c_char) -> EcatStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("metrics"))?;
        let path = Path::new(str_arg(path, "path")?);
        emit(&m.0, path, MetricsFormat::from_path(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `m` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ecat_metrics_free(m: *mut EcatMetrics) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Rank-based AUC of `n` scores against 0/1 labels.
///
/// # Safety
/// `scores` and `labels` must point to `n` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ecat_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> EcatStatus {
    guard(|| {
        if scores.is_null() || labels.is_null() || out.is_null() {
            return Err(null("scores, labels, or out"));
        }
        *out = auc(std::slice::from_raw_parts(scores, n), std::slice::from_raw_parts(labels, n))?;
        Ok(())
    })
}
