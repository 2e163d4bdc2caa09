//! C ABI over `safenav`.
//!
//! Objects cross the boundary as opaque handles created by `sn_*_new` or
//! `sn_*_generate` and released with the matching `sn_*_free`. Every fallible
//! call returns an [`SnStatus`]; on failure the message is available from
//! [`sn_last_error`] on the same thread. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use safenav::config::RunConfig;
use safenav::controller::{baseline_dcbf_step, mdd_step, StepStatus, WarmStart};
use safenav::dynamics::{bicycle_step, Control, State};
use safenav::geometry::{circle_to_polytope, dubins_shortest, Circle, Polytope, Pose2D};
use safenav::planner::{load_weights, FallbackPlanner, ModelWeights, NeuralPlanner, Planner};
use safenav::sim::{generate_scenario, run_episode, ControllerKind, Layout, Outcome, Scenario};
use safenav::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    InvalidWeights = 4,
    Io = 5,
    Generation = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnLayout {
    Square = 0,
    Line = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnControllerKind {
    Mdd1 = 0,
    Dcbf = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnOutcome {
    Success = 0,
    Collision = 1,
    Timeout = 2,
    SolverAbort = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnStepStatus {
    Optimal = 0,
    Degraded = 1,
    SolverFailure = 2,
    InfeasibleStart = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SnPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SnState {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub theta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SnControl {
    pub a: f64,
    pub delta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SnCircle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnEpisodeSummary {
    pub outcome: SnOutcome,
    pub steps: usize,
    /// Smallest audited obstacle distance over the episode (m).
    pub min_distance: f64,
    /// Steps whose solve was not applied.
    pub failures: usize,
}

/// Generated or loaded scenario.
pub struct SnScenario(Scenario);

/// Controller with its configuration and warm start.
pub struct SnController {
    cfg: RunConfig,
    kind: ControllerKind,
    warm: WarmStart,
}

/// Loaded planner weights.
pub struct SnWeights(Arc<ModelWeights>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SnStatus {
    match e {
        Error::Config { .. } => SnStatus::InvalidConfig,
        Error::Weights { .. } => SnStatus::InvalidWeights,
        Error::Io { .. } => SnStatus::Io,
        Error::Generation(_) => SnStatus::Generation,
        Error::Json { .. } | Error::InvalidArgument(_) | Error::InvalidObstacle(_) => SnStatus::InvalidArgument,
    }
}

struct Fail(SnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SnStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, records any failure and converts panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SnStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SnStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn string<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Fail(SnStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn out<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    ptr.as_mut().ok_or_else(|| null(what))
}

fn to_state(s: &SnState) -> State {
    State::new(s.x, s.y, s.v, s.theta)
}

fn from_state(s: &State) -> SnState {
    SnState { x: s.x, y: s.y, v: s.v, theta: s.theta }
}

fn to_circle(c: &SnCircle) -> Circle {
    Circle::new(c.cx, c.cy, c.r)
}

/// Optional TOML text (null means defaults), same schema as the CLI's `--config`.
unsafe fn config(toml: *const c_char) -> Result<RunConfig, Fail> {
    let cfg = if toml.is_null() {
        RunConfig::default()
    } else {
        RunConfig::from_toml(string(toml, "config_toml")?)?
    };
    cfg.scenario.validate()?;
    cfg.sim().validate()?;
    Ok(cfg)
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length, or 0 if there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sn_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Length of the shortest Dubins path between two poses.
///
/// # Safety
/// `out_length` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sn_dubins_length(q0: SnPose, q1: SnPose, r_min: f64, out_length: *mut f64) -> SnStatus {
    guard(|| {
        let out_length = out(out_length, "out_length")?;
        if !(r_min > 0.0 && r_min.is_finite()) {
            return Err(Fail(SnStatus::InvalidArgument, "r_min must be finite and > 0".into()));
        }
        let a = Pose2D::new(q0.x, q0.y, q0.theta);
        let b = Pose2D::new(q1.x, q1.y, q1.theta);
        if !(a.is_finite() && b.is_finite()) {
            return Err(Fail(SnStatus::InvalidArgument, "poses must be finite".into()));
        }
        *out_length = dubins_shortest(a, b, r_min).length();
        Ok(())
    })
}

/// Advances the bicycle model one step.
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out_state` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sn_bicycle_step(
    state: SnState,
    control: SnControl,
    config_toml: *const c_char,
    out_state: *mut SnState,
) -> SnStatus {
    guard(|| {
        let out_state = out(out_state, "out_state")?;
        let cfg = config(config_toml)?;
        let next = bicycle_step(&to_state(&state), &Control::new(control.a, control.delta), &cfg.bicycle);
        *out_state = from_state(&next);
        Ok(())
    })
}

/// Generates a seeded scenario with the default generator settings.
///
/// # Safety
/// `out_scenario` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sn_scenario_generate(seed: u64, layout: SnLayout, out_scenario: *mut *mut SnScenario) -> SnStatus {
    guard(|| {
        let slot = out(out_scenario, "out_scenario")?;
        let layout = match layout {
            SnLayout::Square => Layout::Square,
            SnLayout::Line => Layout::Line,
        };
        let sc = generate_scenario(seed, layout, &Default::default())?;
        *slot = Box::into_raw(Box::new(SnScenario(sc)));
        Ok(())
    })
}

/// Parses a scenario from its JSON text.
///
/// # Safety
/// `json` must be null or NUL-terminated; `out_scenario` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sn_scenario_from_json(json: *const c_char, out_scenario: *mut *mut SnScenario) -> SnStatus {
    guard(|| {
        let slot = out(out_scenario, "out_scenario")?;
        let sc: Scenario = serde_json::from_str(string(json, "json")?)
            .map_err(|e| Fail(SnStatus::InvalidArgument, format!("scenario: {e}")))?;
        *slot = Box::into_raw(Box::new(SnScenario(sc)));
        Ok(())
    })
}

/// Start pose, goal pose and obstacle count of a scenario.
///
/// # Safety
/// `sc` must be a live handle; out pointers must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sn_scenario_info(
    sc: *const SnScenario,
    out_start: *mut SnPose,
    out_goal: *mut SnPose,
    out_obstacles: *mut usize,
) -> SnStatus {
    guard(|| {
        let sc = &sc.as_ref().ok_or_else(|| null("sc"))?.0;
        let pose = |p: &Pose2D| SnPose { x: p.x, y: p.y, theta: p.theta };
        *out(out_start, "out_start")? = pose(&sc.start);
        *out(out_goal, "out_goal")? = pose(&sc.goal);
        *out(out_obstacles, "out_obstacles")? = sc.obstacles.len();
        Ok(())
    })
}

/// Copies up to `len` obstacles into `buf`; `out_written` receives the count copied.
///
/// # Safety
/// `sc` must be a live handle; `buf` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn sn_scenario_obstacles(
    sc: *const SnScenario,
    buf: *mut SnCircle,
    len: usize,
    out_written: *mut usize,
) -> SnStatus {
    guard(|| {
        let sc = &sc.as_ref().ok_or_else(|| null("sc"))?.0;
        let n = sc.obstacles.len().min(len);
        if n > 0 && buf.is_null() {
            return Err(null("buf"));
        }
        for (i, c) in sc.obstacles.iter().take(n).enumerate() {
            *buf.add(i) = SnCircle { cx: c.center.x, cy: c.center.y, r: c.radius };
        }
        *out(out_written, "out_written")? = n;
        Ok(())
    })
}

/// # Safety
/// `sc` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sn_scenario_free(sc: *mut SnScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Loads planner weights from a file.
///
/// # Safety
/// `path` must be NUL-terminated; `out_weights` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sn_weights_load(path: *const c_char, out_weights: *mut *mut SnWeights) -> SnStatus {
    guard(|| {
        let slot = out(out_weights, "out_weights")?;
        let path = string(path, "path")?;
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        *slot = Box::into_raw(Box::new(SnWeights(Arc::new(load_weights(&bytes)?))));
        Ok(())
    })
}

/// # Safety
/// `w` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sn_weights_free(w: *mut SnWeights) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Runs one closed-loop episode. `weights` null selects the fallback planner.
///
/// # Safety
/// Handles must be live; `config_toml` null or NUL-terminated; `out_summary` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sn_episode_run(
    sc: *const SnScenario,
    weights: *const SnWeights,
    kind: SnControllerKind,
    config_toml: *const c_char,
    out_summary: *mut SnEpisodeSummary,
) -> SnStatus {
    guard(|| {
        let sc = &sc.as_ref().ok_or_else(|| null("sc"))?.0;
        let out_summary = out(out_summary, "out_summary")?;
        let cfg = config(config_toml)?;
        let mut planner: Box<dyn Planner> = match weights.as_ref() {
            Some(w) => Box::new(NeuralPlanner::new(w.0.clone())),
            None => Box::new(FallbackPlanner),
        };
        let log = run_episode(sc, planner.as_mut(), controller_kind(kind), &cfg.sim())?;
        *out_summary = SnEpisodeSummary {
            outcome: match log.outcome {
                Outcome::Success => SnOutcome::Success,
                Outcome::Collision => SnOutcome::Collision,
                Outcome::Timeout => SnOutcome::Timeout,
                Outcome::SolverAbort => SnOutcome::SolverAbort,
            },
            steps: log.steps.len(),
            min_distance: log.min_distance(),
            failures: log.failures(),
        };
        Ok(())
    })
}

fn controller_kind(k: SnControllerKind) -> ControllerKind {
    match k {
        SnControllerKind::Mdd1 => ControllerKind::Mdd1,
        SnControllerKind::Dcbf => ControllerKind::Dcbf,
    }
}

/// Creates a controller. `config_toml` null means defaults.
///
/// # Safety
/// `config_toml` null or NUL-terminated; `out_controller` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sn_controller_new(
    kind: SnControllerKind,
    config_toml: *const c_char,
    out_controller: *mut *mut SnController,
) -> SnStatus {
    guard(|| {
        let slot = out(out_controller, "out_controller")?;
        let cfg = config(config_toml)?;
        *slot = Box::into_raw(Box::new(SnController {
            cfg,
            kind: controller_kind(kind),
            warm: WarmStart::new(),
        }));
        Ok(())
    })
}

/// Horizon length N; the reference passed to `sn_controller_step` needs N + 1 states.
///
/// # Safety
/// `ctrl` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sn_controller_horizon(ctrl: *const SnController) -> usize {
    ctrl.as_ref().map_or(0, |c| c.cfg.controller.horizon)
}

/// One receding-horizon step. Writes the control to apply and the step status.
///
/// # Safety
/// `ctrl` live; `reference` holds `n_reference` states; `obstacles` holds `n_obstacles` circles.
#[no_mangle]
pub unsafe extern "C" fn sn_controller_step(
    ctrl: *mut SnController,
    state: SnState,
    reference: *const SnState,
    n_reference: usize,
    obstacles: *const SnCircle,
    n_obstacles: usize,
    out_control: *mut SnControl,
    out_status: *mut SnStepStatus,
) -> SnStatus {
    guard(|| {
        let c = ctrl.as_mut().ok_or_else(|| null("ctrl"))?;
        let reference: Vec<State> = slice(reference, n_reference, "reference")?.iter().map(to_state).collect();
        let circles: Vec<Circle> = slice(obstacles, n_obstacles, "obstacles")?.iter().map(to_circle).collect();
        let x = to_state(&state);
        let res = match c.kind {
            ControllerKind::Mdd1 => {
                let polys = circles
                    .iter()
                    .map(|ci| circle_to_polytope(ci, c.cfg.episode.n_facets))
                    .collect::<Result<Vec<Polytope>, _>>()?;
                mdd_step(&x, &reference, &polys, &c.cfg.controller, &c.cfg.bicycle, &mut c.warm)?
            }
            ControllerKind::Dcbf => baseline_dcbf_step(&x, &reference, &circles, &c.cfg.controller, &c.cfg.bicycle, &mut c.warm)?,
        };
        *out(out_control, "out_control")? = SnControl { a: res.u0.a, delta: res.u0.delta };
        *out(out_status, "out_status")? = match res.status {
            StepStatus::Optimal => SnStepStatus::Optimal,
            StepStatus::Degraded => SnStepStatus::Degraded,
            StepStatus::SolverFailure => SnStepStatus::SolverFailure,
            StepStatus::InfeasibleStart => SnStepStatus::InfeasibleStart,
        };
        Ok(())
    })
}

/// Drops the warm start so the next step solves from scratch.
///
/// # Safety
/// `ctrl` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sn_controller_reset(ctrl: *mut SnController) -> SnStatus {
    guard(|| {
        ctrl.as_mut().ok_or_else(|| null("ctrl"))?.warm = WarmStart::new();
        Ok(())
    })
}

/// # Safety
/// `ctrl` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sn_controller_free(ctrl: *mut SnController) {
    if !ctrl.is_null() {
        drop(Box::from_raw(ctrl));
    }
}
