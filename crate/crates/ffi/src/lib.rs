//! C ABI for the `hystab` library.
//!
//! The interface follows the usual opaque-handle pattern: callers build a
//! [`hystab_scenario`] from a JSON configuration or a named preset, run it to
//! obtain a [`hystab_result`], and read samples and diagnostics through
//! accessor functions. Every fallible entry point returns a `HYSTAB_*` error
//! code; the message for the most recent failure on the current thread is
//! available via [`hystab_last_error`].
//!
//! Strings returned as `char*` are heap-allocated and must be released with
//! [`hystab_string_free`]; handles must be released with their matching
//! `_free` function. Passing a null handle to an accessor is reported as
//! `HYSTAB_ERR_NULL` rather than undefined behavior, except for the `_free`
//! functions, which accept null as a no-op. The header mirroring this module
//! is maintained by hand at `include/hystab.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hystab::config::ScenarioConfig;
use hystab::scenarios::{build_preset, PresetId};
use hystab::simulate::{run, CycleDiagnostics, FeedbackSpec, Scenario, Trajectory};
use hystab::lti::OmegaGrid;
use hystab::stability::{equilibrium, transformed_loop_check};
use hystab::Error;

/// Success.
pub const HYSTAB_OK: i32 = 0;
/// A required pointer argument was null.
pub const HYSTAB_ERR_NULL: i32 = 1;
/// A string argument was not valid UTF-8.
pub const HYSTAB_ERR_UTF8: i32 = 2;
/// The configuration could not be parsed or validated.
pub const HYSTAB_ERR_CONFIG: i32 = 3;
/// The model rejected the request (singular system, bad dimensions, ...).
pub const HYSTAB_ERR_MODEL: i32 = 4;
/// An index was out of range.
pub const HYSTAB_ERR_RANGE: i32 = 5;
/// An internal invariant failed (a panic was caught at the boundary).
pub const HYSTAB_ERR_INTERNAL: i32 = 6;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let cleaned: String = msg.chars().filter(|&ch| ch != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(cleaned).expect("NUL bytes removed");
    });
}

fn code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Json(_) | Error::Scenario(_) => HYSTAB_ERR_CONFIG,
        _ => HYSTAB_ERR_MODEL,
    }
}

fn report(err: Error) -> i32 {
    set_last_error(&err.to_string());
    code_for(&err)
}

/// Runs `body` with panics converted to `HYSTAB_ERR_INTERNAL` so unwinding
/// never crosses the C boundary.
fn guarded(body: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(code) => code,
        Err(_) => {
            set_last_error("internal panic");
            HYSTAB_ERR_INTERNAL
        }
    }
}

/// Reads a required C string argument, reporting null and UTF-8 failures.
///
/// # Safety
/// `ptr` must be null or a NUL-terminated string valid for reads.
unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, i32> {
    if ptr.is_null() {
        set_last_error("null string argument");
        return Err(HYSTAB_ERR_NULL);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8");
        HYSTAB_ERR_UTF8
    })
}

fn leak_string(text: String) -> *mut c_char {
    let cleaned: String = text.chars().filter(|&ch| ch != '\0').collect();
    CString::new(cleaned).expect("NUL bytes removed").into_raw()
}

/// Opaque scenario handle: a validated system, feedback operator and solver
/// configuration ready to run.
#[allow(non_camel_case_types)]
pub struct hystab_scenario {
    inner: Scenario,
}

/// Opaque simulation result: the sampled trajectory plus boundedness and
/// limit-cycle diagnostics.
#[allow(non_camel_case_types)]
pub struct hystab_result {
    traj: Trajectory,
    diag: CycleDiagnostics,
}

/// Returns the message of the most recent error on the calling thread.
///
/// The pointer stays valid until the next failing call on the same thread;
/// it must not be freed.
#[no_mangle]
pub extern "C" fn hystab_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Builds a scenario from a JSON configuration document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hystab_scenario_from_json(
    json: *const c_char,
    out: *mut *mut hystab_scenario,
) -> i32 {
    guarded(|| {
        if out.is_null() {
            set_last_error("null output argument");
            return HYSTAB_ERR_NULL;
        }
        let text = match read_str(json) {
            Ok(text) => text,
            Err(code) => return code,
        };
        let config = match ScenarioConfig::from_json(text) {
            Ok(config) => config,
            Err(err) => return report(err),
        };
        match config.to_scenario() {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(hystab_scenario { inner }));
                HYSTAB_OK
            }
            Err(err) => report(err),
        }
    })
}

/// Builds one of the built-in presets: `"double_integrator"`,
/// `"second_order"` or `"oscillator"`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hystab_scenario_preset(
    name: *const c_char,
    out: *mut *mut hystab_scenario,
) -> i32 {
    guarded(|| {
        if out.is_null() {
            set_last_error("null output argument");
            return HYSTAB_ERR_NULL;
        }
        let name = match read_str(name) {
            Ok(name) => name,
            Err(code) => return code,
        };
        match name.parse::<PresetId>() {
            Ok(id) => {
                let inner = build_preset(id);
                *out = Box::into_raw(Box::new(hystab_scenario { inner }));
                HYSTAB_OK
            }
            Err(err) => report(err),
        }
    })
}

/// Overrides the time horizon and step size of a scenario.
///
/// # Safety
/// `sc` must be a live handle from a `hystab_scenario_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn hystab_scenario_set_time(
    sc: *mut hystab_scenario,
    t_end: f64,
    dt: f64,
) -> i32 {
    guarded(|| {
        let Some(sc) = sc.as_mut() else {
            set_last_error("null scenario handle");
            return HYSTAB_ERR_NULL;
        };
        sc.inner.t_end = t_end;
        sc.inner.dt = dt;
        match sc.inner.validate() {
            Ok(()) => HYSTAB_OK,
            Err(err) => report(err),
        }
    })
}

/// Serializes a scenario back to its JSON configuration form.
///
/// Returns null on failure. The caller owns the string and must release it
/// with [`hystab_string_free`].
///
/// # Safety
/// `sc` must be a live handle from a `hystab_scenario_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn hystab_scenario_to_json(sc: *const hystab_scenario) -> *mut c_char {
    let Some(sc) = sc.as_ref() else {
        set_last_error("null scenario handle");
        return std::ptr::null_mut();
    };
    leak_string(ScenarioConfig::from_scenario(&sc.inner).to_json_pretty())
}

/// Releases a scenario handle. Null is a no-op.
///
/// # Safety
/// `sc` must be null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hystab_scenario_free(sc: *mut hystab_scenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Integrates the closed loop and produces a result handle.
///
/// # Safety
/// `sc` must be a live scenario handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hystab_run(
    sc: *const hystab_scenario,
    out: *mut *mut hystab_result,
) -> i32 {
    guarded(|| {
        if out.is_null() {
            set_last_error("null output argument");
            return HYSTAB_ERR_NULL;
        }
        let Some(sc) = sc.as_ref() else {
            set_last_error("null scenario handle");
            return HYSTAB_ERR_NULL;
        };
        match run(&sc.inner) {
            Ok((traj, diag)) => {
                *out = Box::into_raw(Box::new(hystab_result { traj, diag }));
                HYSTAB_OK
            }
            Err(err) => report(err),
        }
    })
}

/// Number of samples in the trajectory (including the initial state).
///
/// # Safety
/// `res` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn hystab_result_len(res: *const hystab_result) -> usize {
    res.as_ref().map_or(0, |res| res.traj.len())
}

/// State dimension of the simulated system.
///
/// # Safety
/// `res` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn hystab_result_dim(res: *const hystab_result) -> usize {
    res.as_ref().map_or(0, |res| res.traj.x.first().map_or(0, |x| x.len()))
}

/// Copies sample `k` into the output arguments: time, output y, operator
/// output ξ, and the state vector into `x` (`x_len` entries available).
///
/// Any of `t`, `y`, `xi` may be null to skip that value; `x` may be null
/// when `x_len` is 0.
///
/// # Safety
/// `res` must be a live result handle; non-null output pointers must be
/// valid for writes (`x` for `x_len` doubles).
#[no_mangle]
pub unsafe extern "C" fn hystab_result_sample(
    res: *const hystab_result,
    k: usize,
    t: *mut f64,
    y: *mut f64,
    xi: *mut f64,
    x: *mut f64,
    x_len: usize,
) -> i32 {
    guarded(|| {
        let Some(res) = res.as_ref() else {
            set_last_error("null result handle");
            return HYSTAB_ERR_NULL;
        };
        if k >= res.traj.len() {
            set_last_error("sample index out of range");
            return HYSTAB_ERR_RANGE;
        }
        let state = &res.traj.x[k];
        if x_len > 0 {
            if x.is_null() {
                set_last_error("null state buffer with nonzero length");
                return HYSTAB_ERR_NULL;
            }
            if x_len < state.len() {
                set_last_error("state buffer shorter than the state dimension");
                return HYSTAB_ERR_RANGE;
            }
            for (i, value) in state.iter().enumerate() {
                *x.add(i) = *value;
            }
        }
        if !t.is_null() {
            *t = res.traj.t[k];
        }
        if !y.is_null() {
            *y = res.traj.y[k];
        }
        if !xi.is_null() {
            *xi = res.traj.xi[k];
        }
        HYSTAB_OK
    })
}

/// Reads the boundedness verdict and limit-cycle estimate.
///
/// `bounded` is set to 1 or 0. `found` is set to 1 when a limit cycle was
/// detected, in which case `period` and `amplitude` carry its estimate;
/// otherwise they are set to 0. Any output pointer may be null to skip it.
///
/// # Safety
/// `res` must be a live result handle; non-null output pointers must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hystab_result_diagnostics(
    res: *const hystab_result,
    bounded: *mut i32,
    growth_rate: *mut f64,
    found: *mut i32,
    period: *mut f64,
    amplitude: *mut f64,
) -> i32 {
    guarded(|| {
        let Some(res) = res.as_ref() else {
            set_last_error("null result handle");
            return HYSTAB_ERR_NULL;
        };
        if !bounded.is_null() {
            *bounded = res.diag.bounded as i32;
        }
        if !growth_rate.is_null() {
            *growth_rate = res.diag.growth_rate;
        }
        let cycle = res.diag.limit_cycle.as_ref();
        if !found.is_null() {
            *found = cycle.is_some() as i32;
        }
        if !period.is_null() {
            *period = cycle.map_or(0.0, |c| c.period);
        }
        if !amplitude.is_null() {
            *amplitude = cycle.map_or(0.0, |c| c.amplitude);
        }
        HYSTAB_OK
    })
}

/// Serializes the full diagnostics record to JSON.
///
/// Returns null on failure; the caller releases the string with
/// [`hystab_string_free`].
///
/// # Safety
/// `res` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn hystab_result_diagnostics_json(res: *const hystab_result) -> *mut c_char {
    let Some(res) = res.as_ref() else {
        set_last_error("null result handle");
        return std::ptr::null_mut();
    };
    match serde_json::to_string_pretty(&res.diag) {
        Ok(text) => leak_string(text),
        Err(err) => {
            set_last_error(&err.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Releases a result handle. Null is a no-op.
///
/// # Safety
/// `res` must be null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hystab_result_free(res: *mut hystab_result) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Runs the stability analysis (pole classification, equilibrium set, and
/// the two-loop frequency-domain test) and returns the report as JSON.
///
/// # Safety
/// `sc` must be a live scenario handle; `out` must be valid for writes and
/// receives a string to release with [`hystab_string_free`].
#[no_mangle]
pub unsafe extern "C" fn hystab_analyze_json(
    sc: *const hystab_scenario,
    out: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        if out.is_null() {
            set_last_error("null output argument");
            return HYSTAB_ERR_NULL;
        }
        let Some(sc) = sc.as_ref() else {
            set_last_error("null scenario handle");
            return HYSTAB_ERR_NULL;
        };
        let sc = &sc.inner;
        let poles = match sc.sys.poles() {
            Ok(report) => report,
            Err(err) => return report(err),
        };
        let mut doc = serde_json::json!({
            "poles": poles.poles.iter().map(|p| (p.re, p.im)).collect::<Vec<_>>(),
            "classification": format!("{:?}", poles.classification),
            "max_real_part": poles.max_real_part(),
        });
        if !matches!(sc.feedback, FeedbackSpec::None) {
            let (gamma, h) = match sc.feedback {
                FeedbackSpec::Sign { gamma, h, .. } => (gamma, h),
                FeedbackSpec::Stop { c, h, .. } => (c, h),
                FeedbackSpec::Static { gamma, .. } => (gamma, 0.0),
                FeedbackSpec::None => unreachable!(),
            };
            let eq = match equilibrium(&sc.sys, &sc.feedback) {
                Ok(eq) => eq,
                Err(err) => return report(err),
            };
            let loops = match transformed_loop_check(&sc.sys, gamma, h, &OmegaGrid::default()) {
                Ok(loops) => loops,
                Err(err) => return report(err),
            };
            doc["equilibrium"] = serde_json::to_value(&eq).expect("serializable");
            doc["two_loop"] = serde_json::to_value(&loops).expect("serializable");
        }
        *out = leak_string(serde_json::to_string_pretty(&doc).expect("serializable"));
        HYSTAB_OK
    })
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `text` must be null or a string obtained from this library; it must not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hystab_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}
