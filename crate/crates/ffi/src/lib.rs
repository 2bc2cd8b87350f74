//! C ABI over the transduce toolkit.
//!
//! Conventions:
//! - Every fallible call returns a [`TransduceStatus`]; results go through
//!   out-pointers that are left untouched on failure.
//! - The message for the most recent failure on the calling thread is
//!   available from [`transduce_last_error`].
//! - Handles are opaque and owned by the caller once returned; release them
//!   with the matching `_free` function. Passing NULL to a `_free` is a no-op.
//! - Panics never cross the boundary; they surface as `TRANSDUCE_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use transduce::em_circuit::electromechanical_efficiency;
use transduce::extraction::{lorentzian_fit, sqrt_lorentzian_fit, FitResult, RealSeries};
use transduce::io::config::{load_config, parse_config, Config};
use transduce::optomech::{cooperativity, swap_probability, thermal_occupation, DriveTone};
use transduce::piezo::rotated_piezo_tensor;
use transduce::pulsed::efficiency_budget;
use transduce::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransduceStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Invalid parameters or configuration.
    Invalid = 3,
    NotConverged = 4,
    Io = 5,
    Panic = 6,
}

/// Device description loaded from a JSON config.
pub struct TransduceDevice {
    config: Config,
}

/// Outcome of a parameter fit.
pub struct TransduceFit {
    result: FitResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(TransduceStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::NotConverged { .. } => TransduceStatus::NotConverged,
            Error::Io { .. } => TransduceStatus::Io,
            _ => TransduceStatus::Invalid,
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(TransduceStatus::NullPointer, format!("`{name}` is NULL"))
}

/// Run `f`, converting errors and panics into a status plus thread-local message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TransduceStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TransduceStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {msg}"));
            TransduceStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(TransduceStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

unsafe fn live_device<'a>(p: *const TransduceDevice) -> Result<&'a TransduceDevice, Failure> {
    p.as_ref().ok_or_else(|| null("device"))
}

unsafe fn write<T>(out: *mut T, v: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(v);
    Ok(())
}

unsafe fn write_opt<T>(out: *mut T, v: T) {
    if !out.is_null() {
        out.write(v);
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn transduce_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failure on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn transduce_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn boxed_device(config: Config) -> *mut TransduceDevice {
    Box::into_raw(Box::new(TransduceDevice { config }))
}

/// The shipped device description.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn transduce_device_reference(out: *mut *mut TransduceDevice) -> TransduceStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(boxed_device(Config::reference()));
        Ok(())
    })
}

/// Load and validate a config file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn transduce_device_load(path: *const c_char, out: *mut *mut TransduceDevice) -> TransduceStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = load_config(Path::new(path))?;
        out.write(boxed_device(cfg));
        Ok(())
    })
}

/// Parse and validate a config document held in memory.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn transduce_device_from_json(json: *const c_char, out: *mut *mut TransduceDevice) -> TransduceStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = parse_config(text, "<memory>")?;
        out.write(boxed_device(cfg));
        Ok(())
    })
}

/// # Safety
/// `device` must be NULL or a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn transduce_device_free(device: *mut TransduceDevice) {
    if !device.is_null() {
        drop(Box::from_raw(device));
    }
}

/// Number of mechanical modes in the device.
///
/// # Safety
/// `device` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn transduce_device_mode_count(device: *const TransduceDevice, out: *mut usize) -> TransduceStatus {
    guard(|| {
        let d = live_device(device)?;
        write(out, d.config.device.modes.len(), "out")
    })
}

/// Efficiency budget at the config's operating point. Stage pointers may be NULL.
///
/// # Safety
/// `device` must be a live handle; non-NULL out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn transduce_budget(
    device: *const TransduceDevice,
    total: *mut f64,
    electrical: *mut f64,
    optical: *mut f64,
) -> TransduceStatus {
    guard(|| {
        let d = live_device(device)?;
        let op = d.config.operating_point()?;
        let b = efficiency_budget(&d.config.device, op)?;
        write(total, b.total, "total")?;
        write_opt(electrical, b.stages[0].factor);
        write_opt(optical, b.stages[1].factor);
        Ok(())
    })
}

/// Single-photon and multiphoton cooperativity of a named mode.
///
/// # Safety
/// `device` must be a live handle, `mode` NUL-terminated; non-NULL out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn transduce_cooperativity(
    device: *const TransduceDevice,
    mode: *const c_char,
    n_c: f64,
    c0: *mut f64,
    c_om: *mut f64,
) -> TransduceStatus {
    guard(|| {
        let d = live_device(device)?;
        let m = d.config.device.mode(str_arg(mode, "mode")?)?;
        let c = cooperativity(&d.config.device.optical, m, n_c)?;
        write(c0, c.c0, "c0")?;
        write_opt(c_om, c.c_om);
        Ok(())
    })
}

/// Swap probability of a red-sideband pulse of `energy_j` reaching the device.
///
/// # Safety
/// `device` must be a live handle, `mode` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn transduce_swap_probability(
    device: *const TransduceDevice,
    mode: *const c_char,
    energy_j: f64,
    length_s: f64,
    out: *mut f64,
) -> TransduceStatus {
    guard(|| {
        let d = live_device(device)?;
        let c = &d.config.device.optical;
        let m = d.config.device.mode(str_arg(mode, "mode")?)?;
        let tone = DriveTone::red_sideband_pulse(c, m, energy_j, length_s, 1.0);
        write(out, swap_probability(c, m, &tone)?, "out")
    })
}

/// Modeled electrical-to-mechanical efficiency at a mode frequency. Pass a
/// NaN temperature to use the configured matching inductance as is.
///
/// # Safety
/// `device` must be a live handle, `mode` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn transduce_electromechanical_efficiency(
    device: *const TransduceDevice,
    mode: *const c_char,
    temperature_k: f64,
    out: *mut f64,
) -> TransduceStatus {
    guard(|| {
        let d = live_device(device)?;
        let dev = &d.config.device;
        let m = dev.mode(str_arg(mode, "mode")?)?;
        let t = (!temperature_k.is_nan()).then_some(temperature_k);
        let eta = electromechanical_efficiency(&dev.matching_at(t)?, &dev.bvd(m), m.f_m_hz)?;
        write(out, eta, "out")
    })
}

/// Thermal occupation from red and blue sideband count totals.
///
/// # Safety
/// `n_th` must be writable; `sigma` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn transduce_thermal_occupation(
    red_counts: f64,
    blue_counts: f64,
    n_th: *mut f64,
    sigma: *mut f64,
) -> TransduceStatus {
    guard(|| {
        let o = thermal_occupation(red_counts, blue_counts)?;
        write(n_th, o.n_th, "n_th")?;
        write_opt(sigma, o.sigma);
        Ok(())
    })
}

/// Rotated piezoelectric tensor in Voigt form, written row-major into `out[18]`.
///
/// # Safety
/// `out` must point to at least 18 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn transduce_piezo_tensor(phi_rad: f64, e14_si: f64, out: *mut f64) -> TransduceStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = rotated_piezo_tensor(phi_rad, e14_si)?;
        let rows = t.to_rows();
        let dst = std::slice::from_raw_parts_mut(out, 18);
        for (j, row) in rows.iter().enumerate() {
            dst[6 * j..6 * j + 6].copy_from_slice(row);
        }
        Ok(())
    })
}

unsafe fn series(x: *const f64, y: *const f64, n: usize) -> Result<RealSeries, Failure> {
    if x.is_null() {
        return Err(null("x"));
    }
    if y.is_null() {
        return Err(null("y"));
    }
    Ok(RealSeries::new(
        std::slice::from_raw_parts(x, n).to_vec(),
        std::slice::from_raw_parts(y, n).to_vec(),
    ))
}

unsafe fn fit_with(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut *mut TransduceFit,
    f: fn(&RealSeries) -> transduce::Result<FitResult>,
) -> TransduceStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let result = f(&series(x, y, n)?)?;
        out.write(Box::into_raw(Box::new(TransduceFit { result })));
        Ok(())
    })
}

/// Lorentzian fit of `y(x)`; parameters `center`, `fwhm`, `amplitude`, `offset`.
///
/// # Safety
/// `x` and `y` must each point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn transduce_fit_lorentzian(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut *mut TransduceFit,
) -> TransduceStatus {
    fit_with(x, y, n, out, lorentzian_fit)
}

/// Square-root Lorentzian fit of an amplitude spectrum.
///
/// # Safety
/// As for [`transduce_fit_lorentzian`].
#[no_mangle]
pub unsafe extern "C" fn transduce_fit_sqrt_lorentzian(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut *mut TransduceFit,
) -> TransduceStatus {
    fit_with(x, y, n, out, sqrt_lorentzian_fit)
}

/// Value and standard error of a named fit parameter. `sigma` may be NULL.
///
/// # Safety
/// `fit` must be a live handle, `name` NUL-terminated, `value` writable.
#[no_mangle]
pub unsafe extern "C" fn transduce_fit_param(
    fit: *const TransduceFit,
    name: *const c_char,
    value: *mut f64,
    sigma: *mut f64,
) -> TransduceStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        let name = str_arg(name, "name")?;
        let v = f
            .result
            .params
            .get(name)
            .copied()
            .ok_or_else(|| Failure(TransduceStatus::Invalid, format!("no fit parameter `{name}`")))?;
        write(value, v, "value")?;
        write_opt(sigma, f.result.sigma(name));
        Ok(())
    })
}

/// Relative residual norm and convergence flag of a fit. Either pointer may be NULL.
///
/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn transduce_fit_quality(
    fit: *const TransduceFit,
    residual_norm: *mut f64,
    converged: *mut bool,
) -> TransduceStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        write_opt(residual_norm, f.result.residual_norm);
        write_opt(converged, f.result.converged);
        Ok(())
    })
}

/// The full fit result as JSON. Release with [`transduce_string_free`].
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn transduce_fit_to_json(fit: *const TransduceFit, out: *mut *mut c_char) -> TransduceStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = serde_json::to_string(&f.result)
            .map_err(|e| Failure(TransduceStatus::Invalid, e.to_string()))?;
        out.write(CString::new(text).expect("JSON has no NULs").into_raw());
        Ok(())
    })
}

/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn transduce_fit_free(fit: *mut TransduceFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn transduce_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
