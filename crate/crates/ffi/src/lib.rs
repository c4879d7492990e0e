//! C interface to `hyrelay`.
//!
//! Every fallible call returns an [`HrStatus`]; on failure the message is kept per
//! thread and read back with [`hr_last_error`]. Handles are opaque and must be
//! released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hyrelay::channel::{generate_channels, ModeAssignment, ReflectionPlan, Scenario};
use hyrelay::config::{load_scenario, parse_scenario};
use hyrelay::modeselect::{brute_force_select, resolve_bound, select_modes, BoundChoice, Evaluator, Metric, SelectionResult};
use hyrelay::sweep::throughput;
use hyrelay::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Contract = 4,
    Solver = 5,
    Io = 6,
    Panic = 7,
}

/// Values accepted for the `metric` argument of [`hr_select`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrMetric {
    MaxSnr = 0,
    MaxDr = 1,
    MaxRr = 2,
    MaxDg = 3,
    MinRf = 4,
}

/// Values accepted for the `bound` argument.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrBound {
    Direct = 0,
    Relay = 1,
    Auto = 2,
}

/// A validated scenario.
pub struct HrScenario {
    inner: Scenario,
}

/// The outcome of a mode selection.
pub struct HrSelection {
    inner: SelectionResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(HrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Domain(_) => HrStatus::Domain,
            Error::Contract(_) => HrStatus::Contract,
            Error::Validation { .. } => HrStatus::InvalidArgument,
            Error::Solver(_) => HrStatus::Solver,
            Error::Io { .. } => HrStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(HrStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(HrStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            HrStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("`{what}` is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

fn bound_choice(b: i32) -> Result<BoundChoice, Failure> {
    match b {
        0 => Ok(BoundChoice::Direct),
        1 => Ok(BoundChoice::Relay),
        2 => Ok(BoundChoice::Auto),
        _ => Err(invalid(format!("unknown bound {b}"))),
    }
}

fn metric(m: i32) -> Result<Metric, Failure> {
    usize::try_from(m)
        .ok()
        .and_then(|i| Metric::ALL.get(i).copied())
        .ok_or_else(|| invalid(format!("unknown metric {m}")))
}

/// Message of the last failed call on this thread, or null if none. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// The bundled five-relay scenario.
///
/// # Safety
/// `out` must be a valid pointer to write a handle into.
#[no_mangle]
pub unsafe extern "C" fn hr_scenario_canonical(out: *mut *mut HrScenario) -> HrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, HrScenario { inner: Scenario::canonical() });
        Ok(())
    })
}

/// Parse a scenario from a JSON document.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hr_scenario_from_json(json: *const c_char, out: *mut *mut HrScenario) -> HrStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, HrScenario { inner: parse_scenario(text)? });
        Ok(())
    })
}

/// Load a scenario from a JSON file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hr_scenario_load(path: *const c_char, out: *mut *mut HrScenario) -> HrStatus {
    guard(|| {
        let path = read_str(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, HrScenario { inner: load_scenario(path)? });
        Ok(())
    })
}

/// Replace the channel seed.
///
/// # Safety
/// `scenario` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hr_scenario_set_seed(scenario: *mut HrScenario, seed: u64) -> HrStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        s.inner.seed = seed;
        Ok(())
    })
}

/// Number of relays, 0 for a null handle.
///
/// # Safety
/// `scenario` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hr_scenario_relay_count(scenario: *const HrScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.relay_count())
}

/// # Safety
/// `scenario` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hr_scenario_free(scenario: *mut HrScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Greedy mode selection with `metric` (an [`HrMetric`]) under `bound` (an [`HrBound`]).
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hr_select(
    scenario: *const HrScenario,
    metric_id: i32,
    bound: i32,
    out: *mut *mut HrSelection,
) -> HrStatus {
    guard(|| {
        let s = &scenario.as_ref().ok_or_else(|| null("scenario"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = metric(metric_id)?;
        let choice = bound_choice(bound)?;
        let ch = generate_channels(s)?;
        let kind = resolve_bound(choice, &ch, s.pt_mw)?;
        let ev = Evaluator::new(&ch, s.pt_mw, s.eta, s.gamma_max, kind);
        put(out, HrSelection { inner: select_modes(&ev, m)? });
        Ok(())
    })
}

/// Exhaustive mode selection; limited to small relay counts.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hr_brute(scenario: *const HrScenario, bound: i32, out: *mut *mut HrSelection) -> HrStatus {
    guard(|| {
        let s = &scenario.as_ref().ok_or_else(|| null("scenario"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let choice = bound_choice(bound)?;
        let ch = generate_channels(s)?;
        let kind = resolve_bound(choice, &ch, s.pt_mw)?;
        let ev = Evaluator::new(&ch, s.pt_mw, s.eta, s.gamma_max, kind);
        put(out, HrSelection { inner: brute_force_select(&ev)? });
        Ok(())
    })
}

/// SNR bound for a fixed assignment: `passive[i]` (zero-based) reflects at phase
/// `theta[i]`. `theta` may be null for zero phases.
///
/// # Safety
/// `passive` and a non-null `theta` must point to `len` elements; `gamma` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hr_eval(
    scenario: *const HrScenario,
    bound: i32,
    passive: *const usize,
    theta: *const f64,
    len: usize,
    gamma: *mut f64,
) -> HrStatus {
    guard(|| {
        let s = &scenario.as_ref().ok_or_else(|| null("scenario"))?.inner;
        if gamma.is_null() {
            return Err(null("gamma"));
        }
        if len > 0 && passive.is_null() {
            return Err(null("passive"));
        }
        let idx: &[usize] = if len == 0 { &[] } else { std::slice::from_raw_parts(passive, len) };
        let phases: Option<&[f64]> = (!theta.is_null() && len > 0).then(|| std::slice::from_raw_parts(theta, len));
        let mode = ModeAssignment::with_passive(s.relay_count(), idx)?;
        let mut refl = ReflectionPlan::new();
        for (i, &n) in idx.iter().enumerate() {
            let t = phases.map_or(0.0, |p| p[i]);
            if !t.is_finite() {
                return Err(invalid(format!("theta[{i}] is not finite")));
            }
            refl.set(n, t.rem_euclid(std::f64::consts::TAU), s.gamma_max);
        }
        let ch = generate_channels(s)?;
        let kind = resolve_bound(bound_choice(bound)?, &ch, s.pt_mw)?;
        let ev = Evaluator::new(&ch, s.pt_mw, s.eta, s.gamma_max, kind);
        *gamma = ev.bound(&mode, &refl)?.gamma;
        Ok(())
    })
}

/// Achieved SNR bound, NaN for a null handle.
///
/// # Safety
/// `sel` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hr_selection_gamma(sel: *const HrSelection) -> f64 {
    sel.as_ref().map_or(f64::NAN, |s| s.inner.gamma)
}

/// All-active SNR bound of the same realization, NaN for a null handle.
///
/// # Safety
/// `sel` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hr_selection_baseline_gamma(sel: *const HrSelection) -> f64 {
    sel.as_ref().map_or(f64::NAN, |s| s.inner.baseline_gamma)
}

/// Throughput `½·log2(1+γ)` in bit/s/Hz, NaN for a null handle.
///
/// # Safety
/// `sel` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hr_selection_throughput(sel: *const HrSelection) -> f64 {
    sel.as_ref().map_or(f64::NAN, |s| throughput(s.inner.gamma))
}

/// Bound the selection ran under: 0 direct, 1 relay, 2 single antenna, -1 for null.
///
/// # Safety
/// `sel` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hr_selection_bound(sel: *const HrSelection) -> i32 {
    use hyrelay::bounds::BoundKind;
    sel.as_ref().map_or(-1, |s| match s.inner.bound_kind {
        BoundKind::Direct => 0,
        BoundKind::Relay => 1,
        BoundKind::SingleAntenna => 2,
    })
}

/// Copies up to `cap` zero-based passive relay indices into `buf` and returns how
/// many there are in total. `buf` may be null to query the count.
///
/// # Safety
/// `sel` must be a live handle or null; a non-null `buf` must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn hr_selection_passive(sel: *const HrSelection, buf: *mut usize, cap: usize) -> usize {
    let Some(s) = sel.as_ref() else { return 0 };
    let passive = s.inner.mode.passive();
    if !buf.is_null() {
        for (i, &n) in passive.iter().take(cap).enumerate() {
            *buf.add(i) = n;
        }
    }
    passive.len()
}

/// Reflection phase of passive relay `relay` (zero-based).
///
/// # Safety
/// `sel` must be a live handle and `theta` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hr_selection_theta(sel: *const HrSelection, relay: usize, theta: *mut f64) -> HrStatus {
    guard(|| {
        let s = &sel.as_ref().ok_or_else(|| null("sel"))?.inner;
        if theta.is_null() {
            return Err(null("theta"));
        }
        let r = s
            .refl
            .get(relay)
            .ok_or_else(|| Failure(HrStatus::Contract, format!("relay {relay} is not passive")))?;
        *theta = r.theta;
        Ok(())
    })
}

/// # Safety
/// `sel` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hr_selection_free(sel: *mut HrSelection) {
    if !sel.is_null() {
        drop(Box::from_raw(sel));
    }
}
