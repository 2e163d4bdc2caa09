use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::controller::{baseline_dcbf_step, mdd_step, ControllerConfig, StepResult, StepStatus, WarmStart};
use crate::distance::primal_distance;
use crate::dynamics::{bicycle_step, BicycleParams, Control, State};
use crate::error::{Error, Result};
use crate::geometry::{circle_to_polytope, Polytope};
use crate::planner::{Planner, ReferenceConfig};
use crate::solver::SolveStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Mdd1,
    Dcbf,
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mdd1" => Ok(ControllerKind::Mdd1),
            "dcbf" => Ok(ControllerKind::Dcbf),
            _ => Err(Error::invalid(format!("unknown controller '{s}' (expected mdd1 or dcbf)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    /// Success radius around the goal position (m).
    pub goal_tol: f64,
    pub max_steps: usize,
    /// Consecutive non-applied solves that abort the episode.
    pub max_consecutive_failures: usize,
    /// Facets of the polytopes that over-approximate each obstacle disk.
    pub n_facets: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            goal_tol: 1.0,
            max_steps: 600,
            max_consecutive_failures: 10,
            n_facets: 8,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.goal_tol > 0.0) {
            return Err(Error::config("episode.goal_tol", "must be > 0"));
        }
        if self.max_steps == 0 {
            return Err(Error::config("episode.max_steps", "must be >= 1"));
        }
        if self.max_consecutive_failures == 0 {
            return Err(Error::config("episode.max_consecutive_failures", "must be >= 1"));
        }
        if self.n_facets < 3 {
            return Err(Error::config("episode.n_facets", "must be >= 3"));
        }
        Ok(())
    }
}

/// Everything an episode needs besides the scenario and planner.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub controller: ControllerConfig,
    pub bicycle: BicycleParams,
    pub planner: ReferenceConfig,
    pub episode: EpisodeConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.controller.validate()?;
        self.bicycle.validate()?;
        self.planner.validate()?;
        self.episode.validate()?;
        if self.planner.horizon != self.controller.horizon {
            return Err(Error::config("planner.horizon", "must equal controller.horizon"));
        }
        if (self.planner.dt - self.bicycle.dt).abs() > 1e-12 {
            return Err(Error::config("planner.dt", "must equal bicycle.dt"));
        }
        if self.planner.r_min < self.bicycle.min_turning_radius() - 1e-9 {
            return Err(Error::config("planner.r_min", "must not be below the bicycle's minimum turning radius"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
    SolverAbort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub state: State,
    pub control: Control,
    pub next_state: State,
    /// Reference handed to the controller.
    pub reference: Vec<State>,
    pub status: StepStatus,
    pub solver_status: Option<SolveStatus>,
    pub iterations: usize,
    pub planner_time: f64,
    pub controller_time: f64,
    /// Audited distance from `next_state` to the nearest obstacle polytope (m).
    #[serde(with = "super::unbounded")]
    pub min_distance: f64,
    /// Smallest avoidance constraint value of the solve; `+inf` if none.
    #[serde(with = "super::unbounded")]
    pub min_residual: f64,
    pub active_obstacles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub seed: u64,
    pub controller: ControllerKind,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
}

impl EpisodeLog {
    pub fn min_distance(&self) -> f64 {
        self.steps.iter().map(|s| s.min_distance).fold(f64::INFINITY, f64::min)
    }

    pub fn failures(&self) -> usize {
        self.steps.iter().filter(|s| !s.status.applied()).count()
    }
}

/// Over-approximating polytopes of a scenario's disks.
pub fn scenario_polytopes(sc: &Scenario, n_facets: usize) -> Result<Vec<Polytope>> {
    sc.obstacles.iter().map(|c| circle_to_polytope(c, n_facets)).collect()
}

/// Smallest distance from the robot position to any obstacle.
pub fn min_obstacle_distance(s: &State, obstacles: &[Polytope]) -> f64 {
    obstacles
        .iter()
        .map(|p| primal_distance(&s.position(), p).map(|(h, _)| h.sqrt()).unwrap_or(0.0))
        .fold(f64::INFINITY, f64::min)
}

/// Closed-set collision test: touching an obstacle counts.
pub fn check_collision(s: &State, obstacles: &[Polytope]) -> bool {
    obstacles
        .iter()
        .any(|p| primal_distance(&s.position(), p).map_or(true, |(h, _)| h == 0.0))
}

pub fn run_episode(sc: &Scenario, planner: &mut dyn Planner, kind: ControllerKind, cfg: &SimConfig) -> Result<EpisodeLog> {
    run_episode_with(sc, planner, kind, cfg, &mut |_, _| {})
}

/// Runs one closed-loop episode; `observer` sees every step and its solve.
pub fn run_episode_with(
    sc: &Scenario,
    planner: &mut dyn Planner,
    kind: ControllerKind,
    cfg: &SimConfig,
    observer: &mut dyn FnMut(&StepRecord, &StepResult),
) -> Result<EpisodeLog> {
    cfg.validate()?;
    let polys = scenario_polytopes(sc, cfg.episode.n_facets)?;
    let mut log = EpisodeLog {
        seed: sc.seed,
        controller: kind,
        steps: Vec::new(),
        outcome: Outcome::Timeout,
    };
    let mut state = State::from_pose(&sc.start, 0.0);
    let mut warm = WarmStart::new();
    let mut failures = 0;
    planner.start(&sc.start, &sc.goal, &sc.obstacles)?;
    let at_goal = |s: &State| (s.position() - sc.goal.position()).norm() <= cfg.episode.goal_tol;
    if at_goal(&state) {
        log.outcome = Outcome::Success;
        return Ok(log);
    }
    for step in 0..cfg.episode.max_steps {
        let t0 = Instant::now();
        let reference = planner.plan(&state, &sc.goal, &cfg.planner)?.states;
        let planner_time = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let result = match kind {
            ControllerKind::Mdd1 => mdd_step(&state, &reference, &polys, &cfg.controller, &cfg.bicycle, &mut warm)?,
            ControllerKind::Dcbf => baseline_dcbf_step(&state, &reference, &sc.obstacles, &cfg.controller, &cfg.bicycle, &mut warm)?,
        };
        let controller_time = t1.elapsed().as_secs_f64();
        let next_state = bicycle_step(&state, &result.u0, &cfg.bicycle);
        let record = StepRecord {
            step,
            state,
            control: result.u0,
            next_state,
            reference,
            status: result.status,
            solver_status: result.solver_status,
            iterations: result.iterations,
            planner_time,
            controller_time,
            min_distance: min_obstacle_distance(&next_state, &polys),
            min_residual: result.constraint_residuals.iter().copied().fold(f64::INFINITY, f64::min),
            active_obstacles: result.active.len(),
        };
        observer(&record, &result);
        log.steps.push(record);
        if result.status == StepStatus::InfeasibleStart {
            log.outcome = Outcome::SolverAbort;
            return Ok(log);
        }
        if check_collision(&next_state, &polys) {
            log.outcome = Outcome::Collision;
            return Ok(log);
        }
        failures = if result.status.applied() { 0 } else { failures + 1 };
        if failures >= cfg.episode.max_consecutive_failures {
            log.outcome = Outcome::SolverAbort;
            return Ok(log);
        }
        state = next_state;
        if at_goal(&state) {
            log.outcome = Outcome::Success;
            return Ok(log);
        }
    }
    Ok(log)
}
