//! C ABI for the simulator: load a scenario, run it, and pull the results
//! out as JSON or CSV strings.
//!
//! Conventions: every function returns an [`AdvswarmStatus`]; out-parameters
//! receive owned handles or strings on success and are left untouched on
//! failure. Handles are opaque and must be released with the matching free
//! function; strings with [`advswarm_string_free`]. The last error message is
//! kept per thread and readable via [`advswarm_last_error`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;

use advswarm::harness::config::{ConfigError, ScenarioConfig};
use advswarm::harness::metrics::ticks_to_csv;
use advswarm::harness::runner::{run_scenario_with_seed, RunError, RunOutput};

/// Status codes mirroring the CLI exit codes: 2 for configuration errors,
/// 3 for numerical aborts.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvswarmStatus {
    Ok = 0,
    NullArgument = 1,
    ConfigError = 2,
    NumericalAbort = 3,
    Utf8Error = 4,
    IoError = 5,
}

/// Opaque scenario handle.
pub struct AdvswarmScenario {
    config: ScenarioConfig,
    seed_override: Option<u64>,
}

/// Opaque run-result handle.
pub struct AdvswarmRun {
    output: RunOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn config_status(e: &ConfigError) -> AdvswarmStatus {
    match e {
        ConfigError::Io(_) => AdvswarmStatus::IoError,
        _ => AdvswarmStatus::ConfigError,
    }
}

/// Message of the most recent error on this thread. The pointer stays valid
/// until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn advswarm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `text` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn advswarm_scenario_from_toml(
    text: *const c_char,
    out: *mut *mut AdvswarmScenario,
) -> AdvswarmStatus {
    if text.is_null() || out.is_null() {
        set_last_error("null argument");
        return AdvswarmStatus::NullArgument;
    }
    let Ok(text) = CStr::from_ptr(text).to_str() else {
        set_last_error("scenario text is not valid UTF-8");
        return AdvswarmStatus::Utf8Error;
    };
    match ScenarioConfig::from_toml_str(text) {
        Ok(config) => {
            *out = Box::into_raw(Box::new(AdvswarmScenario {
                config,
                seed_override: None,
            }));
            AdvswarmStatus::Ok
        }
        Err(e) => {
            set_last_error(&e.to_string());
            config_status(&e)
        }
    }
}

/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn advswarm_scenario_load(
    path: *const c_char,
    out: *mut *mut AdvswarmScenario,
) -> AdvswarmStatus {
    if path.is_null() || out.is_null() {
        set_last_error("null argument");
        return AdvswarmStatus::NullArgument;
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        set_last_error("path is not valid UTF-8");
        return AdvswarmStatus::Utf8Error;
    };
    match ScenarioConfig::load(path) {
        Ok(config) => {
            *out = Box::into_raw(Box::new(AdvswarmScenario {
                config,
                seed_override: None,
            }));
            AdvswarmStatus::Ok
        }
        Err(e) => {
            set_last_error(&e.to_string());
            config_status(&e)
        }
    }
}

/// Overrides the master seed of a loaded scenario.
///
/// # Safety
/// `scenario` must be a live handle from a scenario constructor.
#[no_mangle]
pub unsafe extern "C" fn advswarm_scenario_set_seed(
    scenario: *mut AdvswarmScenario,
    seed: u64,
) -> AdvswarmStatus {
    let Some(scenario) = scenario.as_mut() else {
        set_last_error("null scenario handle");
        return AdvswarmStatus::NullArgument;
    };
    scenario.seed_override = Some(seed);
    AdvswarmStatus::Ok
}

/// # Safety
/// `scenario` must be a live handle (or NULL, which is a no-op).
#[no_mangle]
pub unsafe extern "C" fn advswarm_scenario_free(scenario: *mut AdvswarmScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the scenario to completion.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be a valid pointer to
/// receive the run handle.
#[no_mangle]
pub unsafe extern "C" fn advswarm_run(
    scenario: *const AdvswarmScenario,
    out: *mut *mut AdvswarmRun,
) -> AdvswarmStatus {
    let Some(scenario) = scenario.as_ref() else {
        set_last_error("null scenario handle");
        return AdvswarmStatus::NullArgument;
    };
    if out.is_null() {
        set_last_error("null output pointer");
        return AdvswarmStatus::NullArgument;
    }
    let seed = scenario.seed_override.unwrap_or(scenario.config.seed);
    match run_scenario_with_seed(&scenario.config, seed) {
        Ok(output) => {
            *out = Box::into_raw(Box::new(AdvswarmRun { output }));
            AdvswarmStatus::Ok
        }
        Err(RunError::Config(e)) => {
            set_last_error(&e.to_string());
            config_status(&e)
        }
        Err(e) => {
            set_last_error(&e.to_string());
            AdvswarmStatus::NumericalAbort
        }
    }
}

/// # Safety
/// `run` must be a live handle (or NULL, which is a no-op).
#[no_mangle]
pub unsafe extern "C" fn advswarm_run_free(run: *mut AdvswarmRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of tick records in the run (robots times steps).
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn advswarm_run_tick_count(run: *const AdvswarmRun) -> usize {
    run.as_ref().map_or(0, |r| r.output.ticks.len())
}

fn export_string(text: String, out: *mut *mut c_char) -> AdvswarmStatus {
    match CString::new(text) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            AdvswarmStatus::Ok
        }
        Err(_) => {
            set_last_error("interior NUL in exported text");
            AdvswarmStatus::Utf8Error
        }
    }
}

/// Summary plus configuration echo as a JSON document. The caller owns the
/// returned string.
///
/// # Safety
/// `run` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn advswarm_run_summary_json(
    run: *const AdvswarmRun,
    out: *mut *mut c_char,
) -> AdvswarmStatus {
    let Some(run) = run.as_ref() else {
        set_last_error("null run handle");
        return AdvswarmStatus::NullArgument;
    };
    if out.is_null() {
        set_last_error("null output pointer");
        return AdvswarmStatus::NullArgument;
    }
    export_string(run.output.document().to_json(), out)
}

/// Per-tick log as CSV text. The caller owns the returned string.
///
/// # Safety
/// `run` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn advswarm_run_ticks_csv(
    run: *const AdvswarmRun,
    out: *mut *mut c_char,
) -> AdvswarmStatus {
    let Some(run) = run.as_ref() else {
        set_last_error("null run handle");
        return AdvswarmStatus::NullArgument;
    };
    if out.is_null() {
        set_last_error("null output pointer");
        return AdvswarmStatus::NullArgument;
    }
    export_string(ticks_to_csv(&run.output.ticks), out)
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from an advswarm export function and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn advswarm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
