//! C ABI for the station-keeping environment.
//!
//! Handles are opaque pointers created by [`sk_env_new`] and released by
//! [`sk_env_free`]. Every fallible call returns an [`SkStatus`]; the message
//! of the most recent failure on the calling thread is available through
//! [`sk_last_error`]. Only flat `double` arrays cross the boundary.
//!
//! A handle must not be used from two threads at once. Separate handles are
//! independent.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use stationkeep::config::RunConfig;
use stationkeep::environment::{EnvError, Environment, ACTION_DIM, OBS_DIM};

/// Bumped whenever a signature or struct layout changes.
pub const SK_ABI_VERSION: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    NotReset = 4,
    StepAfterDone = 5,
    BufferTooSmall = 6,
    Runtime = 7,
    Panic = 8,
}

/// Per-step scalars returned next to the observation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SkStepInfo {
    pub reward: f64,
    pub terminated: u8,
    pub truncated: u8,
    /// Set when any action component was outside [-1, 1] and was clipped.
    pub clipped: u8,
    /// 0 while running, then 1 time limit, 2 resources, 3 physics.
    pub termination: u8,
    pub strides: u32,
    pub tw50: f64,
    pub distance_km: f64,
    pub sand_used_kg: f64,
    pub helium_used_mol: f64,
}

/// Opaque environment handle.
pub struct SkEnv {
    env: Environment,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(message: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend(message.bytes().filter(|&b| b != 0));
    });
}

fn fail(status: SkStatus, message: impl AsRef<str>) -> SkStatus {
    set_error(message.as_ref());
    status
}

fn guard(f: impl FnOnce() -> SkStatus) -> SkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SkStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn env_status(e: &EnvError) -> SkStatus {
    let status = match e {
        EnvError::Config(_) => SkStatus::ConfigError,
        EnvError::NotReset => SkStatus::NotReset,
        EnvError::StepAfterDone => SkStatus::StepAfterDone,
    };
    fail(status, e.to_string())
}

#[no_mangle]
pub extern "C" fn sk_abi_version() -> u32 {
    SK_ABI_VERSION
}

/// NUL-terminated core crate version, the same string CLI manifests record.
#[no_mangle]
pub extern "C" fn sk_core_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn sk_observation_len() -> usize {
    OBS_DIM
}

#[no_mangle]
pub extern "C" fn sk_action_len() -> usize {
    ACTION_DIM
}

/// Creates an environment from a TOML run configuration. `config_toml` may
/// be NULL for defaults. On success `*out` receives the handle.
///
/// # Safety
/// `config_toml` must be NULL or a NUL-terminated string; `out` must be a
/// valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sk_env_new(config_toml: *const c_char, out: *mut *mut SkEnv) -> SkStatus {
    guard(|| {
        if out.is_null() {
            return fail(SkStatus::NullPointer, "out is NULL");
        }
        *out = ptr::null_mut();
        let config = if config_toml.is_null() {
            RunConfig::default()
        } else {
            let Ok(text) = CStr::from_ptr(config_toml).to_str() else {
                return fail(SkStatus::InvalidArgument, "configuration is not UTF-8");
            };
            match RunConfig::from_toml(text) {
                Ok(c) => c,
                Err(e) => return fail(SkStatus::ConfigError, e.to_string()),
            }
        };
        let grids = match config.wind.load_grids() {
            Ok(g) => g,
            Err(e) => return fail(SkStatus::ConfigError, e.to_string()),
        };
        match Environment::new(config.env_config(), Arc::new(grids)) {
            Ok(env) => {
                *out = Box::into_raw(Box::new(SkEnv { env }));
                SkStatus::Ok
            }
            Err(e) => env_status(&e),
        }
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `env` must be NULL or a handle from [`sk_env_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sk_env_free(env: *mut SkEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

unsafe fn obs_buffer<'a>(obs: *mut f64, len: usize) -> Result<&'a mut [f64], SkStatus> {
    if obs.is_null() {
        return Err(fail(SkStatus::NullPointer, "observation buffer is NULL"));
    }
    if len < OBS_DIM {
        return Err(fail(
            SkStatus::BufferTooSmall,
            format!("observation buffer holds {len} values, {OBS_DIM} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(obs, OBS_DIM))
}

/// Starts an episode and writes the first observation.
///
/// # Safety
/// `env` must be a live handle; `obs` must point to `obs_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sk_env_reset(env: *mut SkEnv, seed: u64, obs: *mut f64, obs_len: usize) -> SkStatus {
    guard(|| {
        let Some(handle) = env.as_mut() else {
            return fail(SkStatus::NullPointer, "environment handle is NULL");
        };
        let buf = match obs_buffer(obs, obs_len) {
            Ok(b) => b,
            Err(s) => return s,
        };
        buf.copy_from_slice(handle.env.reset(seed).as_slice());
        SkStatus::Ok
    })
}

/// Advances one stride with a policy-space action in [-1, 1]^3. Components
/// outside the box are clipped and `info.clipped` is set; non-finite
/// components are rejected.
///
/// # Safety
/// `env` must be a live handle; `action` must point to `action_len` doubles;
/// `obs` to `obs_len` writable doubles; `info` to one writable [`SkStepInfo`].
#[no_mangle]
pub unsafe extern "C" fn sk_env_step(
    env: *mut SkEnv,
    action: *const f64,
    action_len: usize,
    obs: *mut f64,
    obs_len: usize,
    info: *mut SkStepInfo,
) -> SkStatus {
    guard(|| {
        let Some(handle) = env.as_mut() else {
            return fail(SkStatus::NullPointer, "environment handle is NULL");
        };
        if action.is_null() || info.is_null() {
            return fail(SkStatus::NullPointer, "action or info is NULL");
        }
        if action_len != ACTION_DIM {
            return fail(
                SkStatus::InvalidArgument,
                format!("action has {action_len} components, {ACTION_DIM} expected"),
            );
        }
        let buf = match obs_buffer(obs, obs_len) {
            Ok(b) => b,
            Err(s) => return s,
        };
        let raw = std::slice::from_raw_parts(action, ACTION_DIM);
        if raw.iter().any(|a| !a.is_finite()) {
            return fail(SkStatus::InvalidArgument, "action contains a non-finite value");
        }
        let clipped = raw.iter().any(|a| a.abs() > 1.0);
        let a: [f64; ACTION_DIM] = std::array::from_fn(|i| raw[i].clamp(-1.0, 1.0));
        let result = match handle.env.step_normalized(a) {
            Ok(r) => r,
            Err(e) => return env_status(&e),
        };
        let summary = handle.env.summary().expect("episode is running");
        buf.copy_from_slice(result.observation.as_slice());
        *info = SkStepInfo {
            reward: result.reward,
            terminated: result.terminated as u8,
            truncated: result.truncated as u8,
            clipped: clipped as u8,
            termination: result.info.termination.map_or(0, |t| t as u8 + 1),
            strides: result.info.strides as u32,
            tw50: result.info.tw50_so_far,
            distance_km: result.info.distance_km,
            sand_used_kg: summary.sand_used_kg,
            helium_used_mol: summary.helium_used_mol,
        };
        SkStatus::Ok
    })
}

/// Copies the last error message of this thread into `buf` (truncated and
/// always NUL-terminated when `len > 0`). Returns the full message length
/// excluding the terminator, so a caller can size a second attempt.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sk_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}
