use std::sync::Arc;

use super::grid::rasterize;
use super::nn::{arch, decode_next_target, encode_obstacles, encode_reference, ModelWeights};
use super::reference::{fallback_plan, plan_reference, RefTraj, ReferenceConfig};
use crate::dynamics::State;
use crate::error::Result;
use crate::geometry::{Circle, Pose2D};

/// Source of reference trajectories during an episode.
pub trait Planner {
    /// Called once before the first step of an episode.
    fn start(&mut self, start: &Pose2D, goal: &Pose2D, obstacles: &[Circle]) -> Result<()>;
    fn plan(&mut self, x: &State, goal: &Pose2D, cfg: &ReferenceConfig) -> Result<RefTraj>;
}

/// Dubins path straight to the global goal.
#[derive(Debug, Clone, Copy, Default)]
pub struct FallbackPlanner;

impl Planner for FallbackPlanner {
    fn start(&mut self, _start: &Pose2D, _goal: &Pose2D, _obstacles: &[Circle]) -> Result<()> {
        Ok(())
    }

    fn plan(&mut self, x: &State, goal: &Pose2D, cfg: &ReferenceConfig) -> Result<RefTraj> {
        Ok(fallback_plan(x, goal, cfg))
    }
}

/// Learned planner. Encoders run once per episode; each step appends the
/// current pose to the history and decodes the next target.
#[derive(Debug, Clone)]
pub struct NeuralPlanner {
    weights: Arc<ModelWeights>,
    h: Vec<f64>,
    z: Vec<f64>,
    goal: Pose2D,
    history: Vec<Pose2D>,
    /// Every decoded target, in step order.
    pub targets: Vec<Pose2D>,
}

impl NeuralPlanner {
    pub fn new(weights: Arc<ModelWeights>) -> Self {
        Self {
            weights,
            h: Vec::new(),
            z: Vec::new(),
            goal: Pose2D::new(0.0, 0.0, 0.0),
            history: Vec::new(),
            targets: Vec::new(),
        }
    }

    /// Encoder outputs of the current episode.
    pub fn encodings(&self) -> (&[f64], &[f64]) {
        (&self.h, &self.z)
    }
}

impl Planner for NeuralPlanner {
    fn start(&mut self, start: &Pose2D, goal: &Pose2D, obstacles: &[Circle]) -> Result<()> {
        let a = arch();
        self.h = encode_reference(start, goal, &self.weights)?;
        self.z = encode_obstacles(&rasterize(obstacles, a.grid_size, a.cell_size), &self.weights)?;
        self.goal = *goal;
        self.history.clear();
        self.targets.clear();
        Ok(())
    }

    fn plan(&mut self, x: &State, goal: &Pose2D, cfg: &ReferenceConfig) -> Result<RefTraj> {
        self.history.push(x.pose());
        let target = decode_next_target(&self.h, &self.z, &self.goal, &self.history, &self.weights)?;
        self.targets.push(target);
        // Once the goal is within one horizon of travel, steer to it directly.
        let reach = cfg.v_ref * cfg.dt * cfg.horizon as f64;
        if (x.position() - goal.position()).norm() <= reach {
            return Ok(fallback_plan(x, goal, cfg));
        }
        Ok(plan_reference(x, &target, false, cfg))
    }
}
