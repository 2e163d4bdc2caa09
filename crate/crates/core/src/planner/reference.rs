use serde::{Deserialize, Serialize};

use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::geometry::{dubins_shortest, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Cruise speed along the path (m/s); sample spacing is `v_ref * dt`.
    pub v_ref: f64,
    pub dt: f64,
    /// Horizon `N`; the reference holds `N + 1` states.
    pub horizon: usize,
    pub r_min: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            v_ref: 2.0,
            dt: 0.1,
            horizon: 11,
            r_min: 2.0 / 0.5f64.tan(),
        }
    }
}

impl ReferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_ref > 0.0 && self.v_ref.is_finite()) {
            return Err(Error::config("planner.v_ref", "must be finite and > 0"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("planner.dt", "must be finite and > 0"));
        }
        if !(self.r_min > 0.0 && self.r_min.is_finite()) {
            return Err(Error::config("planner.r_min", "must be finite and > 0"));
        }
        if self.horizon == 0 {
            return Err(Error::config("planner.horizon", "must be >= 1"));
        }
        Ok(())
    }
}

/// Reference for the controller: `N + 1` states along a Dubins path.
#[derive(Debug, Clone, PartialEq)]
pub struct RefTraj {
    pub states: Vec<State>,
}

/// Samples the shortest Dubins path from the current pose to `target` every
/// `v_ref * dt` meters, holding the end pose once the path is exhausted.
///
/// When `target_is_goal`, held poses carry zero speed so the robot is asked
/// to stop there.
pub fn plan_reference(x_t: &State, target: &Pose2D, target_is_goal: bool, cfg: &ReferenceConfig) -> RefTraj {
    let path = dubins_shortest(x_t.pose(), *target, cfg.r_min);
    let len = path.length();
    let ds = cfg.v_ref * cfg.dt;
    let states = (0..=cfg.horizon)
        .map(|k| {
            let s = k as f64 * ds;
            let pose = path.sample(s);
            let v = if target_is_goal && s >= len { 0.0 } else { cfg.v_ref };
            State::from_pose(&pose, v)
        })
        .collect();
    RefTraj { states }
}

/// Non-learned planner: the target is always the global goal.
pub fn fallback_plan(x_t: &State, goal: &Pose2D, cfg: &ReferenceConfig) -> RefTraj {
    plan_reference(x_t, goal, true, cfg)
}
