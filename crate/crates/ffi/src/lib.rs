//! C ABI for the selfsync simulator.
//!
//! Configurations and simulations are opaque handles created and destroyed
//! through this API. Every fallible function returns an [`SsStatus`]; on
//! failure a description is available from [`ss_last_error`] on the same
//! thread until the next failing call.
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the duration of the call.
//! Null handles and null out-pointers are reported as
//! [`SsStatus::NullPointer`]. Handles must not be used after being freed and
//! must not be shared between threads without external locking.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::cmp::Ordering;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use selfsync::netsim::SimError;
use selfsync::protocol::{self, DutyCyclingMessage, Inbox};
use selfsync::{Activity, ConfigError, RunConfig, Simulation, TraceRecord};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    IoError = 4,
    SimulationError = 5,
    NoSuchNode = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsActivity {
    Inactive = 0,
    Active = 1,
}

impl From<Activity> for SsActivity {
    fn from(a: Activity) -> Self {
        match a {
            Activity::Active => SsActivity::Active,
            Activity::Inactive => SsActivity::Inactive,
        }
    }
}

/// Opaque run configuration.
pub struct SsConfig {
    inner: RunConfig,
}

/// Opaque simulation instance.
pub struct SsSimulation {
    inner: Simulation,
}

/// Observables of one period. Energies are cumulative per bucket.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SsTraceRecord {
    pub period: u64,
    pub mean_activity: f64,
    pub mean_battery: f64,
    pub sun: f64,
    pub cloud: f64,
    pub e_tx: f64,
    pub e_rx: f64,
    pub e_idle: f64,
    pub e_active: f64,
    pub e_app: f64,
    pub messages_sent: u64,
    pub messages_received: u64,
}

impl From<TraceRecord> for SsTraceRecord {
    fn from(r: TraceRecord) -> Self {
        Self {
            period: r.period,
            mean_activity: r.mean_activity,
            mean_battery: r.mean_battery,
            sun: r.sun,
            cloud: r.cloud,
            e_tx: r.energy.tx,
            e_rx: r.energy.rx,
            e_idle: r.energy.idle,
            e_active: r.energy.active,
            e_app: r.energy.app,
            messages_sent: r.messages_sent as u64,
            messages_received: r.messages_received as u64,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SsNodeState {
    /// Activation variable.
    pub s: f64,
    pub active: bool,
    /// False while the node is out of energy.
    pub alive: bool,
    pub battery: f64,
}

/// Called with `user_data`, the node id and its new activity whenever a
/// node's activity flips.
pub type SsActivityCallback =
    Option<unsafe extern "C" fn(user_data: *mut c_void, node: usize, activity: SsActivity)>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    let c = CString::new(msg).expect("interior NULs were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SsStatus, msg: impl Into<String>) -> SsStatus {
    set_error(msg);
    status
}

/// Run `f`, turning a panic into [`SsStatus::Panic`].
fn guard(f: impl FnOnce() -> SsStatus) -> SsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(SsStatus::Panic, msg)
        }
    }
}

fn config_status(e: ConfigError) -> SsStatus {
    let status = match e {
        ConfigError::Read { .. } => SsStatus::IoError,
        _ => SsStatus::ConfigError,
    };
    fail(status, e.to_string())
}

fn sim_status(e: SimError) -> SsStatus {
    let status = match e {
        SimError::NoSuchNode(_) => SsStatus::NoSuchNode,
        SimError::Config(_) => SsStatus::ConfigError,
        _ => SsStatus::SimulationError,
    };
    fail(status, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SsStatus> {
    if p.is_null() {
        return Err(fail(SsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

macro_rules! non_null {
    ($p:expr, $what:literal) => {
        if $p.is_null() {
            return fail(SsStatus::NullPointer, concat!($what, " is null"));
        }
    };
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn ss_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Create a configuration holding the defaults.
#[no_mangle]
pub unsafe extern "C" fn ss_config_default(out: *mut *mut SsConfig) -> SsStatus {
    guard(|| {
        non_null!(out, "out");
        *out = Box::into_raw(Box::new(SsConfig {
            inner: RunConfig::default(),
        }));
        SsStatus::Ok
    })
}

/// Load and validate a TOML configuration file.
#[no_mangle]
pub unsafe extern "C" fn ss_config_load(path: *const c_char, out: *mut *mut SsConfig) -> SsStatus {
    guard(|| {
        non_null!(out, "out");
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match RunConfig::load(path.as_ref()) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SsConfig { inner }));
                SsStatus::Ok
            }
            Err(e) => config_status(e),
        }
    })
}

/// Apply one `key=value` override, e.g. `"network.p_loss=0.2"`. The
/// configuration is unchanged if the result does not validate.
#[no_mangle]
pub unsafe extern "C" fn ss_config_set(
    config: *mut SsConfig,
    assignment: *const c_char,
) -> SsStatus {
    guard(|| {
        non_null!(config, "config");
        let assignment = match str_arg(assignment, "assignment") {
            Ok(a) => a.to_string(),
            Err(s) => return s,
        };
        let cfg = &mut *config;
        match RunConfig::from_toml_with_overrides(&cfg.inner.to_toml_string(), &[assignment]) {
            Ok(next) => {
                cfg.inner = next;
                SsStatus::Ok
            }
            Err(e) => config_status(e),
        }
    })
}

/// Free a configuration. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ss_config_free(config: *mut SsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Create a simulation from a configuration. The configuration is copied
/// and may be freed afterwards.
#[no_mangle]
pub unsafe extern "C" fn ss_simulation_new(
    config: *const SsConfig,
    out: *mut *mut SsSimulation,
) -> SsStatus {
    guard(|| {
        non_null!(config, "config");
        non_null!(out, "out");
        match Simulation::new((*config).inner.clone()) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SsSimulation { inner }));
                SsStatus::Ok
            }
            Err(e) => sim_status(e),
        }
    })
}

/// Advance one period. `record` may be null.
#[no_mangle]
pub unsafe extern "C" fn ss_simulation_step(
    sim: *mut SsSimulation,
    record: *mut SsTraceRecord,
) -> SsStatus {
    guard(|| {
        non_null!(sim, "sim");
        match (*sim).inner.run_period() {
            Ok(r) => {
                if !record.is_null() {
                    *record = r.into();
                }
                SsStatus::Ok
            }
            Err(e) => sim_status(e),
        }
    })
}

/// Advance `periods` periods. When `records` is not null it must have room
/// for `periods` entries.
#[no_mangle]
pub unsafe extern "C" fn ss_simulation_run(
    sim: *mut SsSimulation,
    periods: u64,
    records: *mut SsTraceRecord,
) -> SsStatus {
    guard(|| {
        non_null!(sim, "sim");
        let sim = &mut (*sim).inner;
        for i in 0..periods {
            match sim.run_period() {
                Ok(r) if !records.is_null() => *records.add(i as usize) = r.into(),
                Ok(_) => {}
                Err(e) => return sim_status(e),
            }
        }
        SsStatus::Ok
    })
}

/// Index of the next period to run.
#[no_mangle]
pub unsafe extern "C" fn ss_simulation_period(sim: *const SsSimulation, out: *mut u64) -> SsStatus {
    guard(|| {
        non_null!(sim, "sim");
        non_null!(out, "out");
        *out = (*sim).inner.period();
        SsStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn ss_simulation_node_count(
    sim: *const SsSimulation,
    out: *mut usize,
) -> SsStatus {
    guard(|| {
        non_null!(sim, "sim");
        non_null!(out, "out");
        *out = (*sim).inner.node_count();
        SsStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn ss_simulation_node_state(
    sim: *const SsSimulation,
    node: usize,
    out: *mut SsNodeState,
) -> SsStatus {
    guard(|| {
        non_null!(sim, "sim");
        non_null!(out, "out");
        let sim = &(*sim).inner;
        let state = match (sim.node_state(node), sim.battery(node), sim.is_alive(node)) {
            (Ok(st), Ok(b), Ok(alive)) => SsNodeState {
                s: st.s,
                active: st.active,
                alive,
                battery: b.level(),
            },
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return sim_status(e),
        };
        *out = state;
        SsStatus::Ok
    })
}

struct UserData(*mut c_void);

// The caller owns `user_data` and promises it may be used from whichever
// thread drives the simulation.
unsafe impl Send for UserData {}

/// Register `callback` for activity changes of `node`. The handle written
/// to `out_handle` identifies the registration for
/// [`ss_simulation_unregister_callback`].
#[no_mangle]
pub unsafe extern "C" fn ss_simulation_register_callback(
    sim: *mut SsSimulation,
    node: usize,
    callback: SsActivityCallback,
    user_data: *mut c_void,
    out_handle: *mut u32,
) -> SsStatus {
    guard(|| {
        non_null!(sim, "sim");
        non_null!(out_handle, "out_handle");
        let Some(cb) = callback else {
            return fail(SsStatus::NullPointer, "callback is null");
        };
        let data = UserData(user_data);
        let result = (*sim).inner.register_changed_callback(node, move |id, a| {
            let data = &data;
            cb(data.0, id, a.into());
        });
        match result {
            Ok(h) => {
                *out_handle = h.raw();
                SsStatus::Ok
            }
            Err(e) => sim_status(e),
        }
    })
}

/// Remove a registration. Unknown handles give
/// [`SsStatus::InvalidArgument`].
#[no_mangle]
pub unsafe extern "C" fn ss_simulation_unregister_callback(
    sim: *mut SsSimulation,
    node: usize,
    handle: u32,
) -> SsStatus {
    guard(|| {
        non_null!(sim, "sim");
        let handle = selfsync::protocol::CallbackId::from_raw(handle);
        match (*sim).inner.unregister_changed_callback(node, handle) {
            Ok(true) => SsStatus::Ok,
            Ok(false) => fail(SsStatus::InvalidArgument, "unknown callback handle"),
            Err(e) => sim_status(e),
        }
    })
}

/// Free a simulation. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ss_simulation_free(sim: *mut SsSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Battery-weighted ideal radius.
#[no_mangle]
pub unsafe extern "C" fn ss_ideal_power(
    battery: f64,
    p_min: f64,
    p_max: f64,
    out: *mut f64,
) -> SsStatus {
    guard(|| {
        non_null!(out, "out");
        match protocol::ideal_power(battery, p_min, p_max) {
            Ok(p) => {
                *out = p;
                SsStatus::Ok
            }
            Err(e) => fail(SsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Nearest member of `levels` (strictly increasing, `n >= 1`).
#[no_mangle]
pub unsafe extern "C" fn ss_snap_power(
    p: f64,
    levels: *const f64,
    n: usize,
    out: *mut f64,
) -> SsStatus {
    guard(|| {
        non_null!(levels, "levels");
        non_null!(out, "out");
        let levels = std::slice::from_raw_parts(levels, n);
        if levels.is_empty()
            || levels
                .windows(2)
                .any(|w| w[0].partial_cmp(&w[1]) != Some(Ordering::Less))
        {
            return fail(
                SsStatus::InvalidArgument,
                "levels must be nonempty and strictly increasing",
            );
        }
        *out = protocol::snap_power(p, levels);
        SsStatus::Ok
    })
}

/// `tanh(g * (s + sum(activities)))`. `activities` may be null when `n` is 0.
#[no_mangle]
pub unsafe extern "C" fn ss_update_state(
    s: f64,
    activities: *const f64,
    n: usize,
    g: f64,
    out: *mut f64,
) -> SsStatus {
    guard(|| {
        non_null!(out, "out");
        if n > 0 && activities.is_null() {
            return fail(SsStatus::NullPointer, "activities is null");
        }
        let mut inbox: Inbox = if n == 0 {
            Inbox::new()
        } else {
            std::slice::from_raw_parts(activities, n)
                .iter()
                .enumerate()
                .map(|(i, &activity)| DutyCyclingMessage {
                    sender: i,
                    activity,
                })
                .collect()
        };
        *out = protocol::update_state(s, &mut inbox, g);
        SsStatus::Ok
    })
}
