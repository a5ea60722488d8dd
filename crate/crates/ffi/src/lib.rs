//! C ABI for the source-seek core.
//!
//! Every fallible function returns an [`SsStatus`] and writes its result
//! through an out-pointer. On failure [`ss_last_error_message`] describes the
//! cause. Objects are opaque handles released by their `_free` function;
//! passing null to a `_free` function is a no-op. No function unwinds across
//! the boundary: panics are reported as [`SsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use source_seek::esc::{self, EscController, EscParams, WashoutState};
use source_seek::ga::{self, GaController, GaGains, GradientSample};
use source_seek::harness::{self, BatchOptions, ExperimentConfig};
use source_seek::vehicle;
use source_seek::{ControlInput, Error, FieldSpec, GradientSource, PlanarVector, Pose, Trajectory};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was out of range or not finite.
    InvalidArgument = 2,
    /// A configuration was malformed or inconsistent.
    Config = 3,
    /// A field was evaluated inside its exclusion zone.
    Domain = 4,
    Io = 5,
    /// An index was past the end of a trajectory.
    OutOfRange = 6,
    /// Internal failure; the call had no effect.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SsVec2 {
    pub x: f64,
    pub y: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SsPose {
    pub z1: f64,
    pub z2: f64,
    /// Radians.
    pub theta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SsControl {
    pub u: f64,
    pub omega: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SsEscParams {
    pub a: f64,
    pub omega0: f64,
    pub h: f64,
    pub c_z1: f64,
    pub c_z2: f64,
    pub k1: f64,
    pub k2: f64,
}

/// One recorded instant of a run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SsSample {
    pub t: f64,
    pub pose: SsPose,
    pub control: SsControl,
    /// Field value at the pose.
    pub j: f64,
    /// Gradient (or estimate) the controller used, world frame.
    pub grad: SsVec2,
}

/// Opaque scalar field.
pub struct SsField(FieldSpec);

/// Opaque extremum-seeking controller with its washout state.
pub struct SsEscController {
    params: EscParams,
    washout: WashoutState,
}

/// Opaque closed-loop trajectory.
pub struct SsTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SsStatus {
    match e {
        Error::Domain { .. } => SsStatus::Domain,
        Error::Validation(_) => SsStatus::InvalidArgument,
        Error::Config(_) => SsStatus::Config,
        Error::Io(_) => SsStatus::Io,
    }
}

struct Fail(SsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(SsStatus::NullPointer, format!("{name} is null"))
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SsStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn in_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

fn vec2(v: SsVec2) -> PlanarVector {
    PlanarVector::new(v.x, v.y)
}

fn from_vec2(v: PlanarVector) -> SsVec2 {
    SsVec2 { x: v.x, y: v.y }
}

fn pose(p: SsPose) -> Pose {
    Pose::new(p.z1, p.z2, p.theta)
}

fn from_pose(p: Pose) -> SsPose {
    SsPose { z1: p.z1, z2: p.z2, theta: p.theta }
}

fn from_control(c: ControlInput) -> SsControl {
    SsControl { u: c.u, omega: c.omega }
}

fn esc_params(p: &SsEscParams) -> Result<EscParams, Fail> {
    Ok(EscParams::new(p.a, p.omega0, p.h, p.c_z1, p.c_z2, p.k1, p.k2)?)
}

fn boxed<T>(slot: &mut *mut T, value: T) {
    *slot = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ss_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `(g.y, −g.x)`: the gradient rotated by −90°.
#[no_mangle]
pub extern "C" fn ss_perp(g: SsVec2) -> SsVec2 {
    from_vec2(source_seek::perp(vec2(g)))
}

/// `J = j_star − c1 (z1 − source.x)² − c2 (z2 − source.y)²`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ss_field_quadratic(j_star: f64, c1: f64, c2: f64, source: SsVec2, out: *mut *mut SsField) -> SsStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        boxed(slot, SsField(FieldSpec::quadratic(j_star, c1, c2, vec2(source))?));
        Ok(())
    })
}

/// `J = −z1² − (z2² − z1³)²`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ss_field_nonquad_a(out: *mut *mut SsField) -> SsStatus {
    guard(|| {
        boxed(out_ref(out, "out")?, SsField(FieldSpec::NonQuadA));
        Ok(())
    })
}

/// `J = −z1² − (z2 − z1²)²`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ss_field_nonquad_b(out: *mut *mut SsField) -> SsStatus {
    guard(|| {
        boxed(out_ref(out, "out")?, SsField(FieldSpec::NonQuadB));
        Ok(())
    })
}

/// Fan speed profile `v(R) = c[0] R⁴ + c[1] R³ + c[2] R² + c[3] R + c[4]`
/// with `R = r_f / d`. Pass null `coeffs` for the lab fit.
///
/// # Safety
/// `coeffs` must be null or point to 5 doubles; `out` must be null or valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn ss_field_fan(
    coeffs: *const f64,
    r_f: f64,
    source: SsVec2,
    d_min: f64,
    out: *mut *mut SsField,
) -> SsStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        let c = if coeffs.is_null() {
            source_seek::field::FanPolynomial::LAB_COEFFS
        } else {
            let s = std::slice::from_raw_parts(coeffs, 5);
            [s[0], s[1], s[2], s[3], s[4]]
        };
        let fan = source_seek::field::FanPolynomial::new(c, r_f, vec2(source), d_min)?;
        boxed(slot, SsField(FieldSpec::FanPolynomial(fan)));
        Ok(())
    })
}

/// # Safety
/// `field` must be null or a handle from an `ss_field_*` constructor that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ss_field_free(field: *mut SsField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// # Safety
/// `field` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ss_field_eval(field: *const SsField, p: SsVec2, out: *mut f64) -> SsStatus {
    guard(|| {
        let f = in_ref(field, "field")?;
        *out_ref(out, "out")? = f.0.eval(vec2(p))?;
        Ok(())
    })
}

/// # Safety
/// `field` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ss_field_gradient(field: *const SsField, p: SsVec2, out: *mut SsVec2) -> SsStatus {
    guard(|| {
        let f = in_ref(field, "field")?;
        *out_ref(out, "out")? = from_vec2(f.0.gradient(vec2(p))?);
        Ok(())
    })
}

/// One RK4 step of the unicycle under a held control.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ss_step(p: SsPose, control: SsControl, dt: f64, out: *mut SsPose) -> SsStatus {
    guard(|| {
        let next = vehicle::step(pose(p), ControlInput::new(control.u, control.omega), dt)?;
        *out_ref(out, "out")? = from_pose(next);
        Ok(())
    })
}

/// Gradient-ascent control from a world-frame gradient.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ss_ga_control(grad: SsVec2, theta: f64, k1: f64, k2: f64, out: *mut SsControl) -> SsStatus {
    guard(|| {
        let gains = GaGains::new(k1, k2)?;
        let c = ga::compute_control(&GradientSample::world(vec2(grad)), theta, gains)?;
        *out_ref(out, "out")? = from_control(c);
        Ok(())
    })
}

/// # Safety
/// `params` must be valid for reads; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ss_esc_new(params: *const SsEscParams, out: *mut *mut SsEscController) -> SsStatus {
    guard(|| {
        let p = esc_params(in_ref(params, "params")?)?;
        boxed(out_ref(out, "out")?, SsEscController { params: p, washout: WashoutState::default() });
        Ok(())
    })
}

/// # Safety
/// `ctl` must be null or a live handle from [`ss_esc_new`].
#[no_mangle]
pub unsafe extern "C" fn ss_esc_free(ctl: *mut SsEscController) {
    if !ctl.is_null() {
        drop(Box::from_raw(ctl));
    }
}

/// Feeds one measurement taken at time `t` and returns the control to hold
/// for the next `dt`. `grad_estimate` may be null. The first call
/// initializes the washout filter.
///
/// # Safety
/// `ctl` must be a live handle; `control` must be valid for writes;
/// `grad_estimate` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ss_esc_update(
    ctl: *mut SsEscController,
    measurement: f64,
    t: f64,
    dt: f64,
    theta: f64,
    control: *mut SsControl,
    grad_estimate: *mut SsVec2,
) -> SsStatus {
    guard(|| {
        let c = out_ref(ctl, "ctl")?;
        let control = out_ref(control, "control")?;
        c.params.check_step(dt)?;
        let (washout, est, u) = esc::esc_controller(c.washout, measurement, t, dt, theta, &c.params)?;
        c.washout = washout;
        *control = from_control(u);
        if let Some(g) = grad_estimate.as_mut() {
            *g = from_vec2(est);
        }
        Ok(())
    })
}

/// Closed-loop gradient ascent with exact gradients from `t = 0` to
/// `t_end`. Entering a fan's exclusion zone ends the run early; see
/// [`ss_trajectory_exited_domain`].
///
/// # Safety
/// `field` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ss_simulate_ga(
    field: *const SsField,
    k1: f64,
    k2: f64,
    init: SsPose,
    dt: f64,
    t_end: f64,
    out: *mut *mut SsTrajectory,
) -> SsStatus {
    guard(|| {
        let f = in_ref(field, "field")?;
        let slot = out_ref(out, "out")?;
        let mut ctl = GaController::new(GaGains::new(k1, k2)?);
        let traj = source_seek::simulate(&f.0, &mut ctl, &mut GradientSource::Analytic, pose(init), dt, t_end)?;
        boxed(slot, SsTrajectory(traj));
        Ok(())
    })
}

/// Closed-loop extremum seeking from `t = 0` to `t_end`.
///
/// # Safety
/// `field` and `params` must be valid for reads; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn ss_simulate_esc(
    field: *const SsField,
    params: *const SsEscParams,
    init: SsPose,
    dt: f64,
    t_end: f64,
    out: *mut *mut SsTrajectory,
) -> SsStatus {
    guard(|| {
        let f = in_ref(field, "field")?;
        let p = esc_params(in_ref(params, "params")?)?;
        let slot = out_ref(out, "out")?;
        let mut ctl = EscController::new(p)?;
        let traj = source_seek::simulate(&f.0, &mut ctl, &mut GradientSource::Analytic, pose(init), dt, t_end)?;
        boxed(slot, SsTrajectory(traj));
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a live handle from an `ss_simulate_*` call.
#[no_mangle]
pub unsafe extern "C" fn ss_trajectory_free(traj: *mut SsTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_trajectory_len(traj: *const SsTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `traj` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ss_trajectory_sample(traj: *const SsTrajectory, index: usize, out: *mut SsSample) -> SsStatus {
    guard(|| {
        let t = in_ref(traj, "traj")?;
        let slot = out_ref(out, "out")?;
        let s = t.0.samples.get(index).ok_or_else(|| {
            Fail(SsStatus::OutOfRange, format!("index {index} past the {} samples", t.0.len()))
        })?;
        *slot = SsSample {
            t: s.t,
            pose: from_pose(s.pose),
            control: from_control(s.control),
            j: s.j,
            grad: from_vec2(s.grad_est),
        };
        Ok(())
    })
}

/// Whether the run stopped at a field's exclusion zone.
///
/// # Safety
/// `traj` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ss_trajectory_exited_domain(traj: *const SsTrajectory, out: *mut bool) -> SsStatus {
    guard(|| {
        let t = in_ref(traj, "traj")?;
        *out_ref(out, "out")? = t.0.exited_domain();
        Ok(())
    })
}

/// First time the distance to `source` falls to `fraction` of its initial
/// value. `*settled` is false, and `*time` untouched, if it never does.
///
/// # Safety
/// `traj` must be a live handle; `settled` and `time` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn ss_trajectory_settling_time(
    traj: *const SsTrajectory,
    source: SsVec2,
    fraction: f64,
    settled: *mut bool,
    time: *mut f64,
) -> SsStatus {
    guard(|| {
        let t = in_ref(traj, "traj")?;
        let settled = out_ref(settled, "settled")?;
        let time = out_ref(time, "time")?;
        let ts = harness::settling_time(&t.0, vec2(source), fraction)?;
        *settled = ts.is_some();
        if let Some(v) = ts {
            *time = v;
        }
        Ok(())
    })
}

/// Runs a Monte-Carlo batch described by a TOML config and returns the
/// summary as JSON in `*json`, to be released with [`ss_string_free`]. No
/// files are written. `trials` of 0 keeps the config's trial count.
///
/// # Safety
/// `config_toml` must be a valid NUL-terminated string; `json` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn ss_run_config(config_toml: *const c_char, trials: usize, seed: u64, json: *mut *mut c_char) -> SsStatus {
    guard(|| {
        let text = in_ref(config_toml, "config_toml")?;
        let slot = out_ref(json, "json")?;
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| Fail(SsStatus::Config, "config is not valid UTF-8".to_string()))?;
        let mut cfg = ExperimentConfig::from_toml_str(text)?;
        if trials > 0 {
            cfg.trials = Some(trials);
        }
        cfg.seed = seed;
        let report = harness::monte_carlo(&cfg, &BatchOptions { batch: true, ..Default::default() })?;
        let s = serde_json::to_string(&report.summary).map_err(|e| Fail(SsStatus::Panic, e.to_string()))?;
        *slot = CString::new(s).map_err(|e| Fail(SsStatus::Panic, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from [`ss_run_config`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
