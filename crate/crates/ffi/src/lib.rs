//! C ABI for the de-biased sparse PCA pipeline.
//!
//! Callers hand in a row-major `n x p` data matrix, optionally adjust a
//! configuration handle, run the pipeline, and read estimates back out of an
//! opaque report handle. Every fallible call returns a [`DespcaStatus`];
//! details of the most recent failure on the calling thread are available
//! from [`despca_last_error_message`].
//!
//! Ownership: values returned from `_new`/`despca_run` are owned by the
//! caller and must be released with the matching `_free`. Output buffers are
//! caller-allocated; length requirements are documented per function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use despca::error::Error;
use despca::linalg::DataMatrix;
use despca::pipeline::{default_config, run_pipeline, PipelineConfig, PipelineReport};

/// Status code of a C-ABI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DespcaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NumericalError = 3,
    DegenerateColumn = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_from_error(e: &Error) -> DespcaStatus {
    fn innermost(e: &Error) -> &Error {
        match e {
            Error::Stage { source, .. } => innermost(source),
            other => other,
        }
    }
    match innermost(e) {
        Error::InvalidInput(_) => DespcaStatus::InvalidInput,
        Error::DegenerateColumn { .. } => DespcaStatus::DegenerateColumn,
        _ => DespcaStatus::NumericalError,
    }
}

/// Opaque pipeline configuration handle.
pub struct DespcaConfig {
    inner: PipelineConfig,
}

/// Opaque result handle of one pipeline run.
pub struct DespcaReport {
    inner: PipelineReport,
    n: usize,
}

/// Message of the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn despca_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn despca_version() -> *const c_char {
    concat!("despca-v", env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// New configuration with the defaults for an `n x p` problem (every penalty
/// `sqrt(log p / n)`, 95% level). Returns null for invalid sizes.
#[no_mangle]
pub extern "C" fn despca_config_new(p: usize, n: usize) -> *mut DespcaConfig {
    match default_config(p, n) {
        Ok(inner) => Box::into_raw(Box::new(DespcaConfig { inner })),
        Err(e) => {
            set_last_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Releases a configuration handle. Null is ignored.
#[no_mangle]
pub extern "C" fn despca_config_free(config: *mut DespcaConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

unsafe fn config_mut<'a>(config: *mut DespcaConfig) -> Option<&'a mut DespcaConfig> {
    if config.is_null() {
        set_last_error("null configuration handle");
        None
    } else {
        Some(&mut *config)
    }
}

/// Sets the three penalty levels. Non-negative values required.
///
/// # Safety
/// `config` must be a live handle from [`despca_config_new`].
#[no_mangle]
pub unsafe extern "C" fn despca_config_set_penalties(
    config: *mut DespcaConfig,
    lambda_init: f64,
    lambda: f64,
    lambda_nodewise: f64,
) -> DespcaStatus {
    let Some(c) = config_mut(config) else {
        return DespcaStatus::NullPointer;
    };
    if lambda_init < 0.0 || lambda < 0.0 || lambda_nodewise < 0.0 {
        set_last_error("penalties must be non-negative");
        return DespcaStatus::InvalidInput;
    }
    c.inner.lambda_init = lambda_init;
    c.inner.lambda = lambda;
    c.inner.lambda_nodewise = lambda_nodewise;
    DespcaStatus::Ok
}

/// Sets the confidence level, strictly between 0 and 1.
///
/// # Safety
/// `config` must be a live handle from [`despca_config_new`].
#[no_mangle]
pub unsafe extern "C" fn despca_config_set_level(
    config: *mut DespcaConfig,
    level: f64,
) -> DespcaStatus {
    let Some(c) = config_mut(config) else {
        return DespcaStatus::NullPointer;
    };
    if !(level > 0.0 && level < 1.0) {
        set_last_error("confidence level must be in (0, 1)");
        return DespcaStatus::InvalidInput;
    }
    c.inner.level = level;
    DespcaStatus::Ok
}

/// Sets the support-threshold constant C (> 0).
///
/// # Safety
/// `config` must be a live handle from [`despca_config_new`].
#[no_mangle]
pub unsafe extern "C" fn despca_config_set_threshold_constant(
    config: *mut DespcaConfig,
    c_value: f64,
) -> DespcaStatus {
    let Some(c) = config_mut(config) else {
        return DespcaStatus::NullPointer;
    };
    if !(c_value > 0.0) {
        set_last_error("threshold constant must be positive");
        return DespcaStatus::InvalidInput;
    }
    c.inner.threshold_constant = c_value;
    DespcaStatus::Ok
}

/// Fixes the locality radius; pass a non-positive value to restore the
/// data-driven default.
///
/// # Safety
/// `config` must be a live handle from [`despca_config_new`].
#[no_mangle]
pub unsafe extern "C" fn despca_config_set_locality_radius(
    config: *mut DespcaConfig,
    eta: f64,
) -> DespcaStatus {
    let Some(c) = config_mut(config) else {
        return DespcaStatus::NullPointer;
    };
    c.inner.locality_radius = if eta > 0.0 { Some(eta) } else { None };
    DespcaStatus::Ok
}

/// Enables or disables column-mean centering of the data.
///
/// # Safety
/// `config` must be a live handle from [`despca_config_new`].
#[no_mangle]
pub unsafe extern "C" fn despca_config_set_centering(
    config: *mut DespcaConfig,
    on: bool,
) -> DespcaStatus {
    let Some(c) = config_mut(config) else {
        return DespcaStatus::NullPointer;
    };
    c.inner.center_data = on;
    DespcaStatus::Ok
}

/// Runs the full pipeline on a row-major `n x p` matrix.
///
/// `config` may be null, in which case the defaults for `(p, n)` apply. On
/// success `*out_report` owns the result and must be released with
/// [`despca_report_free`].
///
/// # Safety
/// `data` must point to `n * p` doubles; `out_report` must be a valid
/// non-null destination; `config`, when non-null, must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn despca_run(
    data: *const f64,
    n: usize,
    p: usize,
    config: *const DespcaConfig,
    out_report: *mut *mut DespcaReport,
) -> DespcaStatus {
    if data.is_null() || out_report.is_null() {
        set_last_error("null data or output pointer");
        return DespcaStatus::NullPointer;
    }
    *out_report = std::ptr::null_mut();
    let slice = std::slice::from_raw_parts(data, n.saturating_mul(p));
    let owned_config;
    let pipeline = if config.is_null() {
        owned_config = match default_config(p, n) {
            Ok(c) => c,
            Err(e) => {
                set_last_error(&e.to_string());
                return DespcaStatus::InvalidInput;
            }
        };
        &owned_config
    } else {
        &(*config).inner
    };
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        let x = DataMatrix::new(n, p, slice.to_vec())?;
        run_pipeline(&x, pipeline)
    }));
    match outcome {
        Ok(Ok(report)) => {
            *out_report = Box::into_raw(Box::new(DespcaReport { inner: report, n }));
            DespcaStatus::Ok
        }
        Ok(Err(e)) => {
            set_last_error(&e.to_string());
            status_from_error(&e)
        }
        Err(_) => {
            set_last_error("internal panic in despca_run");
            DespcaStatus::NumericalError
        }
    }
}

/// Releases a report handle. Null is ignored.
#[no_mangle]
pub extern "C" fn despca_report_free(report: *mut DespcaReport) {
    if !report.is_null() {
        drop(unsafe { Box::from_raw(report) });
    }
}

unsafe fn report_ref<'a>(report: *const DespcaReport) -> Option<&'a DespcaReport> {
    if report.is_null() {
        set_last_error("null report handle");
        None
    } else {
        Some(&*report)
    }
}

/// Dimension `p` of the fitted problem; 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn despca_report_dim(report: *const DespcaReport) -> usize {
    report_ref(report).map_or(0, |r| r.inner.loadings.beta.len())
}

/// Sample size the report was fitted on; 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn despca_report_sample_size(report: *const DespcaReport) -> usize {
    report_ref(report).map_or(0, |r| r.n)
}

unsafe fn copy_out(values: &[f64], out: *mut f64) -> DespcaStatus {
    if out.is_null() {
        set_last_error("null output buffer");
        return DespcaStatus::NullPointer;
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    DespcaStatus::Ok
}

/// Copies the penalized loadings estimate into `out` (length `p`).
///
/// # Safety
/// `report` must be a live handle; `out` must hold `despca_report_dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn despca_report_loadings(
    report: *const DespcaReport,
    out: *mut f64,
) -> DespcaStatus {
    let Some(r) = report_ref(report) else {
        return DespcaStatus::NullPointer;
    };
    copy_out(&r.inner.loadings.beta, out)
}

/// Copies the de-biased loadings estimate into `out` (length `p`).
///
/// # Safety
/// `report` must be a live handle; `out` must hold `despca_report_dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn despca_report_debiased(
    report: *const DespcaReport,
    out: *mut f64,
) -> DespcaStatus {
    let Some(r) = report_ref(report) else {
        return DespcaStatus::NullPointer;
    };
    copy_out(&r.inner.inference.b_hat, out)
}

/// Copies the classical PCA baseline into `out` (length `p`).
///
/// # Safety
/// `report` must be a live handle; `out` must hold `despca_report_dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn despca_report_classical(
    report: *const DespcaReport,
    out: *mut f64,
) -> DespcaStatus {
    let Some(r) = report_ref(report) else {
        return DespcaStatus::NullPointer;
    };
    copy_out(&r.inner.classical_baseline, out)
}

/// Copies the estimated per-coordinate standard deviations into `out`
/// (length `p`).
///
/// # Safety
/// `report` must be a live handle; `out` must hold `despca_report_dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn despca_report_sigma(
    report: *const DespcaReport,
    out: *mut f64,
) -> DespcaStatus {
    let Some(r) = report_ref(report) else {
        return DespcaStatus::NullPointer;
    };
    copy_out(&r.inner.inference.sigma_j_hat, out)
}

/// De-biased estimate of the largest eigenvalue; NaN for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn despca_report_eigenvalue(report: *const DespcaReport) -> f64 {
    report_ref(report).map_or(f64::NAN, |r| r.inner.inference.lambda_hat)
}

/// Confidence interval of coordinate `index` (0-based).
///
/// # Safety
/// `report` must be a live handle; `lower` and `upper` must be valid.
#[no_mangle]
pub unsafe extern "C" fn despca_report_interval(
    report: *const DespcaReport,
    index: usize,
    lower: *mut f64,
    upper: *mut f64,
) -> DespcaStatus {
    let Some(r) = report_ref(report) else {
        return DespcaStatus::NullPointer;
    };
    if lower.is_null() || upper.is_null() {
        set_last_error("null output pointer");
        return DespcaStatus::NullPointer;
    }
    let Some((lo, hi)) = r.inner.inference.intervals.get(index) else {
        set_last_error("interval index out of range");
        return DespcaStatus::InvalidInput;
    };
    *lower = *lo;
    *upper = *hi;
    DespcaStatus::Ok
}

/// Writes up to `capacity` recovered support indices (0-based) into `out`
/// and returns the total support size. Call with capacity 0 to query the
/// size.
///
/// # Safety
/// `report` must be a live handle; `out` must hold `capacity` entries when
/// `capacity > 0`.
#[no_mangle]
pub unsafe extern "C" fn despca_report_support(
    report: *const DespcaReport,
    out: *mut usize,
    capacity: usize,
) -> usize {
    let Some(r) = report_ref(report) else {
        return 0;
    };
    let support = &r.inner.inference.support;
    if capacity > 0 && !out.is_null() {
        let count = support.len().min(capacity);
        std::ptr::copy_nonoverlapping(support.as_ptr(), out, count);
    }
    support.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use despca::spiked::{model_2, sample_gaussian};

    fn flat_data(n: usize, p: usize, seed: u64) -> Vec<f64> {
        let m = model_2(p).unwrap();
        let x = sample_gaussian(&m, n, seed).unwrap();
        let mut flat = Vec::with_capacity(n * p);
        for i in 0..n {
            flat.extend_from_slice(x.row(i));
        }
        flat
    }

    #[test]
    fn full_roundtrip() {
        let (n, p) = (40, 10);
        let data = flat_data(n, p, 5);
        let config = despca_config_new(p, n);
        assert!(!config.is_null());
        unsafe {
            assert_eq!(despca_config_set_level(config, 0.9), DespcaStatus::Ok);
            let mut report: *mut DespcaReport = std::ptr::null_mut();
            let status = despca_run(data.as_ptr(), n, p, config, &mut report);
            assert_eq!(status, DespcaStatus::Ok);
            assert_eq!(despca_report_dim(report), p);
            assert_eq!(despca_report_sample_size(report), n);
            let mut b = vec![0.0; p];
            assert_eq!(despca_report_debiased(report, b.as_mut_ptr()), DespcaStatus::Ok);
            assert!(b.iter().all(|v| v.is_finite()));
            let eig = despca_report_eigenvalue(report);
            assert!(eig.is_finite() && eig > 0.0);
            let (mut lo, mut hi) = (0.0, 0.0);
            assert_eq!(
                despca_report_interval(report, 0, &mut lo, &mut hi),
                DespcaStatus::Ok
            );
            assert!(lo <= b[0] && b[0] <= hi);
            let count = despca_report_support(report, std::ptr::null_mut(), 0);
            let mut idx = vec![0usize; count.max(1)];
            let written = despca_report_support(report, idx.as_mut_ptr(), idx.len());
            assert_eq!(written, count);
            despca_report_free(report);
            despca_config_free(config);
        }
    }

    #[test]
    fn null_handling() {
        unsafe {
            assert_eq!(despca_report_dim(std::ptr::null()), 0);
            let mut report: *mut DespcaReport = std::ptr::null_mut();
            let status = despca_run(std::ptr::null(), 3, 3, std::ptr::null(), &mut report);
            assert_eq!(status, DespcaStatus::NullPointer);
            let msg = std::ffi::CStr::from_ptr(despca_last_error_message());
            assert!(!msg.to_bytes().is_empty());
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let config = despca_config_new(10, 40);
        unsafe {
            assert_eq!(
                despca_config_set_level(config, 1.5),
                DespcaStatus::InvalidInput
            );
            assert_eq!(
                despca_config_set_penalties(config, -1.0, 0.1, 0.1),
                DespcaStatus::InvalidInput
            );
            despca_config_free(config);
        }
        assert!(despca_config_new(1, 0).is_null());
    }

    #[test]
    fn non_finite_data_rejected() {
        let (n, p) = (10, 6);
        let mut data = flat_data(n, p, 9);
        data[3] = f64::NAN;
        unsafe {
            let mut report: *mut DespcaReport = std::ptr::null_mut();
            let status = despca_run(data.as_ptr(), n, p, std::ptr::null(), &mut report);
            assert_eq!(status, DespcaStatus::InvalidInput);
            assert!(report.is_null());
        }
    }
}
