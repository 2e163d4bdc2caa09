//! Receding-horizon controllers: MDD-I (dual-form discrete CBF constraints
//! against polytopes) and the MPC-DCBF baseline (closed-form circle barriers).

mod baseline;
mod horizon;
mod mdd;

use serde::{Deserialize, Serialize};

pub use baseline::{build_baseline_step, circle_barrier, BaselineProblem};
pub use mdd::{build_mdd_step, MddProblem};

use crate::distance::primal_distance;
use crate::dynamics::{BicycleParams, Control, State};
use crate::error::{Error, Result};
use crate::geometry::{Circle, Point, Polytope};
use crate::solver::{sqp_solve, warm_start_shift, HessianMode, HorizonLayout, Solution, SolveStatus, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintMode {
    /// Right-hand side `h_t` in square meters.
    #[serde(rename = "paper", alias = "PaperExact")]
    PaperExact,
    /// Right-hand side `sqrt(h_t)`, matching the meters of the dual bound.
    #[serde(rename = "consistent", alias = "UnitConsistent")]
    UnitConsistent,
}

impl std::str::FromStr for ConstraintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(ConstraintMode::PaperExact),
            "consistent" => Ok(ConstraintMode::UnitConsistent),
            _ => Err(Error::invalid(format!("unknown mode '{s}' (expected paper or consistent)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    #[serde(alias = "N")]
    pub horizon: usize,
    #[serde(alias = "N_cbf")]
    pub safety_horizon: usize,
    pub gamma: f64,
    pub p_omega: f64,
    pub d_safe: f64,
    /// Weights on `(x, y, v, theta)` tracking error for `k = 1..N-1`.
    pub state_weights: [f64; 4],
    /// Same, at `k = N`.
    pub terminal_weights: [f64; 4],
    pub control_weights: [f64; 2],
    pub smoothness_weights: [f64; 2],
    pub constraint_mode: ConstraintMode,
    /// Proximal curvature on the dual multipliers, which the cost does not touch.
    pub lambda_prox: f64,
    pub solver: SolverOptions,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            horizon: 11,
            safety_horizon: 10,
            gamma: 0.9,
            p_omega: 1000.0,
            d_safe: 10.0,
            state_weights: [10.0, 10.0, 1.0, 5.0],
            terminal_weights: [20.0, 20.0, 2.0, 10.0],
            control_weights: [0.1, 0.1],
            smoothness_weights: [0.1, 1.0],
            constraint_mode: ConstraintMode::PaperExact,
            lambda_prox: 1.0,
            solver: SolverOptions {
                hessian: HessianMode::GaussNewton,
                ..SolverOptions::default()
            },
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let key = |k: &str| format!("controller.{k}");
        if self.horizon == 0 {
            return Err(Error::config(key("horizon"), "must be >= 1"));
        }
        if self.safety_horizon > self.horizon {
            return Err(Error::config(key("safety_horizon"), "must not exceed the horizon"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config(key("gamma"), "must lie in [0, 1)"));
        }
        if !(self.p_omega >= 0.0 && self.p_omega.is_finite()) {
            return Err(Error::config(key("p_omega"), "must be finite and >= 0"));
        }
        if !(self.d_safe > 0.0) {
            return Err(Error::config(key("d_safe"), "must be > 0"));
        }
        let weights = [
            ("state_weights", &self.state_weights[..]),
            ("terminal_weights", &self.terminal_weights[..]),
            ("control_weights", &self.control_weights[..]),
            ("smoothness_weights", &self.smoothness_weights[..]),
        ];
        for (name, w) in weights {
            if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::config(key(name), "entries must be finite and >= 0"));
            }
        }
        if !(self.lambda_prox > 0.0 && self.lambda_prox.is_finite()) {
            return Err(Error::config(key("lambda_prox"), "must be finite and > 0"));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveObstacle {
    /// Position in the caller's obstacle list.
    pub index: usize,
    pub polytope: Polytope,
    /// Squared distance at the current state (m^2).
    pub h_t: f64,
    pub y_star: Point,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActiveObstacleSet {
    pub members: Vec<ActiveObstacle>,
}

impl ActiveObstacleSet {
    /// True when the robot touches or is inside some member (`h_t == 0`).
    pub fn start_infeasible(&self) -> bool {
        self.members.iter().any(|o| o.h_t == 0.0)
    }

    pub fn indices(&self) -> Vec<usize> {
        self.members.iter().map(|o| o.index).collect()
    }
}

/// Keeps the obstacles within `d_safe` of the robot position.
pub fn filter_obstacles(x_t: &State, obstacles: &[Polytope], d_safe: f64) -> Result<ActiveObstacleSet> {
    let p = x_t.position();
    let mut members = Vec::new();
    for (index, poly) in obstacles.iter().enumerate() {
        let (h, y_star) = primal_distance(&p, poly)?;
        if h.sqrt() <= d_safe {
            members.push(ActiveObstacle {
                index,
                polytope: poly.clone(),
                h_t: h,
                y_star,
            });
        }
    }
    Ok(ActiveObstacleSet { members })
}

/// Strongest braking that does not command reverse motion.
pub fn fallback_brake(x_t: &State, params: &BicycleParams) -> Control {
    let a = (-params.a_max).max(-x_t.v / params.dt);
    Control::new(if a == 0.0 { 0.0 } else { a }, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepStatus {
    Optimal,
    /// Iteration limit reached with violation within `10 tol_feas`; applied.
    Degraded,
    /// Solver failed; the brake control was applied.
    SolverFailure,
    /// The robot started inside an obstacle; emergency stop applied.
    InfeasibleStart,
}

impl StepStatus {
    /// Whether the optimizer's control was applied.
    pub fn applied(self) -> bool {
        matches!(self, StepStatus::Optimal | StepStatus::Degraded)
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub u0: Control,
    pub predicted_states: Vec<State>,
    pub omegas: Vec<f64>,
    /// `lambdas[i][k]`: multipliers of active obstacle `i` at step `k + 1`.
    pub lambdas: Vec<Vec<Vec<f64>>>,
    /// Indices (into the caller's obstacle list) of the active obstacles.
    pub active: Vec<usize>,
    pub h_t: Vec<f64>,
    pub status: StepStatus,
    pub solver_status: Option<SolveStatus>,
    pub solve_time: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub constraint_violation: f64,
    /// Smallest certified distance over the safety horizon (m).
    pub min_margin: f64,
    /// Avoidance constraint values, obstacle-major.
    pub constraint_residuals: Vec<f64>,
}

#[derive(Debug, Clone)]
struct PrevSolve {
    solution: Solution,
    layout: HorizonLayout,
    keys: Vec<usize>,
}

/// Per-controller state carried between MPC steps.
#[derive(Debug, Clone)]
pub struct WarmStart {
    /// Last applied control, used by the smoothness cost.
    pub prev_applied: Control,
    keep: bool,
    prev: Option<PrevSolve>,
}

impl Default for WarmStart {
    fn default() -> Self {
        Self::new()
    }
}

impl WarmStart {
    pub fn new() -> Self {
        Self {
            prev_applied: Control::default(),
            keep: true,
            prev: None,
        }
    }

    /// Never reuses solutions; every solve starts cold.
    pub fn cold() -> Self {
        Self {
            keep: false,
            ..Self::new()
        }
    }

    pub fn has_solution(&self) -> bool {
        self.prev.is_some()
    }

    pub fn reset(&mut self) {
        self.prev = None;
        self.prev_applied = Control::default();
    }

    fn shifted(&self) -> Option<(Vec<f64>, &PrevSolve)> {
        let prev = self.prev.as_ref()?;
        warm_start_shift(&prev.solution, &prev.layout).ok().map(|z| (z, prev))
    }

    fn record(&mut self, applied: bool, solution: Solution, layout: HorizonLayout, keys: Vec<usize>, u0: Control) {
        self.prev_applied = u0;
        self.prev = (self.keep && applied).then_some(PrevSolve { solution, layout, keys });
    }
}

fn classify(sol: &Solution, opts: &SolverOptions) -> StepStatus {
    match sol.status {
        SolveStatus::Optimal => StepStatus::Optimal,
        SolveStatus::MaxIter if sol.constraint_violation <= 10.0 * opts.tol_feas => StepStatus::Degraded,
        _ => StepStatus::SolverFailure,
    }
}

fn check_inputs(x_t: &State, reference: &[State], cfg: &ControllerConfig) -> Result<()> {
    if reference.len() != cfg.horizon + 1 {
        return Err(Error::invalid(format!(
            "reference has {} states, expected N+1 = {}",
            reference.len(),
            cfg.horizon + 1
        )));
    }
    if !x_t.is_finite() || reference.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("state or reference is not finite"));
    }
    Ok(())
}

fn emergency(x_t: &State, cfg: &ControllerConfig, params: &BicycleParams, active: Vec<usize>, h_t: Vec<f64>, warm: &mut WarmStart) -> StepResult {
    let u0 = Control::new(-params.a_max, 0.0);
    warm.prev = None;
    warm.prev_applied = u0;
    StepResult {
        u0,
        predicted_states: vec![*x_t; cfg.horizon + 1],
        omegas: vec![],
        lambdas: vec![],
        active,
        h_t,
        status: StepStatus::InfeasibleStart,
        solver_status: None,
        solve_time: 0.0,
        iterations: 0,
        kkt_residual: f64::NAN,
        constraint_violation: f64::NAN,
        min_margin: 0.0,
        constraint_residuals: vec![],
    }
}

/// One MDD-I step: filter, build, solve (warm-started), extract.
pub fn mdd_step(
    x_t: &State,
    reference: &[State],
    obstacles: &[Polytope],
    cfg: &ControllerConfig,
    params: &BicycleParams,
    warm: &mut WarmStart,
) -> Result<StepResult> {
    check_inputs(x_t, reference, cfg)?;
    let act = filter_obstacles(x_t, obstacles, cfg.d_safe)?;
    let keys = act.indices();
    let h_t: Vec<f64> = act.members.iter().map(|o| o.h_t).collect();
    if act.start_infeasible() {
        return Ok(emergency(x_t, cfg, params, keys, h_t, warm));
    }
    let mut problem = build_mdd_step(x_t, reference, &act, cfg, params)?.with_previous_control(warm.prev_applied);
    let layout = problem.layout().clone();
    if let Some((shifted, prev)) = warm.shifted() {
        let n_ctrl = layout.n_controls();
        let mut z = problem.cold_guess(&shifted[..n_ctrl]);
        let m = layout.safety_horizon;
        z[n_ctrl..n_ctrl + m].copy_from_slice(&shifted[n_ctrl..n_ctrl + m]);
        for (i, key) in keys.iter().enumerate() {
            if let Some(j) = prev.keys.iter().position(|k| k == key) {
                let len = layout.lambda_blocks[i] * m;
                let src = prev.layout.lambda_index(j, 0);
                let dst = layout.lambda_index(i, 0);
                z[dst..dst + len].copy_from_slice(&shifted[src..src + len]);
            }
        }
        problem = problem.with_initial_guess(z)?;
    }

    let sol = sqp_solve(&problem, &cfg.solver);
    let status = classify(&sol, &cfg.solver);
    let z = &sol.z;
    let finite = z.iter().all(|v| v.is_finite());
    let u0 = if status.applied() {
        Control::new(z[0], z[1])
    } else {
        fallback_brake(x_t, params)
    };
    let m = cfg.safety_horizon;
    let (predicted_states, omegas, lambdas, min_margin, residuals) = if finite {
        let states = problem.predicted_states(z);
        let omegas = z[layout.omega_offset()..layout.omega_offset() + m].to_vec();
        let mut lambdas = Vec::with_capacity(keys.len());
        let mut min_margin = f64::INFINITY;
        for i in 0..keys.len() {
            let poly = problem.polytope(i);
            let mut per_step = Vec::with_capacity(m);
            for k in 0..m {
                let l = problem.lambda(z, i, k).to_vec();
                min_margin = min_margin.min(certified_bound(&states[k + 1].position(), poly, &l));
                per_step.push(l);
            }
            lambdas.push(per_step);
        }
        (states, omegas, lambdas, min_margin, problem.avoidance_residuals(z))
    } else {
        (vec![], vec![], vec![], f64::NAN, vec![])
    };
    let result = StepResult {
        u0,
        predicted_states,
        omegas,
        lambdas,
        active: keys.clone(),
        h_t,
        status,
        solver_status: Some(sol.status),
        solve_time: sol.solve_time,
        iterations: sol.iterations,
        kkt_residual: sol.kkt_residual,
        constraint_violation: sol.constraint_violation,
        min_margin,
        constraint_residuals: residuals,
    };
    warm.record(status.applied(), sol, layout, keys, u0);
    Ok(result)
}

/// Weak-duality distance bound; `lambda` is scaled into the dual-feasible set first.
pub fn certified_bound(p: &Point, poly: &Polytope, lambda: &[f64]) -> f64 {
    let norm = poly.transpose_mul(lambda).norm().max(1.0);
    poly.slack(p).iter().zip(lambda).map(|(s, l)| s * l.max(0.0)).sum::<f64>() / norm
}

/// One MPC-DCBF baseline step against circles.
pub fn baseline_dcbf_step(
    x_t: &State,
    reference: &[State],
    circles: &[Circle],
    cfg: &ControllerConfig,
    params: &BicycleParams,
    warm: &mut WarmStart,
) -> Result<StepResult> {
    check_inputs(x_t, reference, cfg)?;
    let p = x_t.position();
    let mut keys = Vec::new();
    let mut active = Vec::new();
    let mut h_t = Vec::new();
    for (i, c) in circles.iter().enumerate() {
        let dist = (p - c.center).norm() - c.radius;
        if dist <= cfg.d_safe {
            keys.push(i);
            active.push(*c);
            h_t.push(circle_barrier(&p, c));
        }
    }
    if h_t.iter().any(|h| *h <= 0.0) {
        return Ok(emergency(x_t, cfg, params, keys, h_t, warm));
    }
    let mut problem = build_baseline_step(x_t, reference, &active, cfg, params)?.with_previous_control(warm.prev_applied);
    let layout = HorizonLayout {
        horizon: cfg.horizon,
        control_dim: 2,
        safety_horizon: cfg.safety_horizon,
        lambda_blocks: vec![],
    };
    if let Some((shifted, _)) = warm.shifted() {
        problem = problem.with_initial_guess(shifted)?;
    }
    let sol = sqp_solve(&problem, &cfg.solver);
    let status = classify(&sol, &cfg.solver);
    let z = &sol.z;
    let u0 = if status.applied() {
        Control::new(z[0], z[1])
    } else {
        fallback_brake(x_t, params)
    };
    let m = cfg.safety_horizon;
    let finite = z.iter().all(|v| v.is_finite());
    let (predicted_states, omegas, min_margin, residuals) = if finite {
        let states = problem.predicted_states(z);
        let mut min_margin = f64::INFINITY;
        for c in &active {
            for s in &states[1..=m] {
                min_margin = min_margin.min((s.position() - c.center).norm() - c.radius);
            }
        }
        let omegas = z[2 * cfg.horizon..2 * cfg.horizon + m].to_vec();
        (states, omegas, min_margin, problem.barrier_residuals(z))
    } else {
        (vec![], vec![], f64::NAN, vec![])
    };
    let result = StepResult {
        u0,
        predicted_states,
        omegas,
        lambdas: vec![],
        active: keys.clone(),
        h_t,
        status,
        solver_status: Some(sol.status),
        solve_time: sol.solve_time,
        iterations: sol.iterations,
        kkt_residual: sol.kkt_residual,
        constraint_violation: sol.constraint_violation,
        min_margin,
        constraint_residuals: residuals,
    };
    warm.record(status.applied(), sol, layout, keys, u0);
    Ok(result)
}
