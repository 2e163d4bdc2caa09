//! Dense nonlinear programming by sequential quadratic programming.
//!
//! Problems are stated as
//!
//! ```text
//!     minimize     f(z)
//!     subject to   c_eq(z)  = 0
//!                  c_in(z) >= 0
//!                  lo <= z <= hi
//! ```
//!
//! and solved with an SQP loop: each iteration linearizes the constraints,
//! solves a strictly convex QP for the step (dual active-set method), and
//! globalizes with a backtracking line search on the l1 exact-penalty merit
//! function.

mod qp;
mod sqp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use qp::{solve_qp, QpError, QpProblem, QpSolution};
pub use sqp::sqp_solve;

use crate::error::{Error, Result};

/// A smooth nonlinear program. Implementations must be pure: the same `z`
/// always yields the same values.
pub trait NlpProblem: Send + Sync {
    fn n_vars(&self) -> usize;

    fn n_eq(&self) -> usize {
        0
    }

    fn n_ineq(&self) -> usize {
        0
    }

    fn objective(&self, z: &[f64]) -> f64;

    fn gradient(&self, z: &[f64]) -> DVector<f64>;

    /// Residual form `f(z) = sum r_i(z)^2`, as `(r, dr/dz)`. Enables the
    /// Gauss-Newton Hessian `2 J^T J`. The Jacobian may cover only the
    /// leading columns when the trailing variables do not enter the residuals.
    fn residuals(&self, _z: &[f64]) -> Option<(DVector<f64>, DMatrix<f64>)> {
        None
    }

    /// Equality constraint values and Jacobian (`n_eq x n_vars`).
    fn eq_constraints(&self, _z: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        (DVector::zeros(0), DMatrix::zeros(0, self.n_vars()))
    }

    /// Inequality constraint values (`>= 0` is feasible) and Jacobian.
    fn ineq_constraints(&self, _z: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        (DVector::zeros(0), DMatrix::zeros(0, self.n_vars()))
    }

    /// Per-variable `(lo, hi)`; infinite entries are unbounded.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_vars();
        (vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }

    fn initial_guess(&self) -> Vec<f64>;

    /// Adds the positive semidefinite part of the constraint curvature,
    /// `-sum mu_i grad^2 c_i(z)`, that the problem can express in closed form.
    fn add_constraint_curvature(&self, _z: &[f64], _ineq_mult: &[f64], _h: &mut DMatrix<f64>) {}

    /// Extra diagonal curvature per variable, for variables the objective does
    /// not touch.
    fn proximal_weights(&self) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HessianMode {
    GaussNewton,
    DampedBfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub tol_kkt: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
    /// Initial l1 merit penalty; raised as needed during the solve.
    pub merit_penalty: f64,
    pub hessian: HessianMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_kkt: 1e-6,
            tol_feas: 1e-6,
            max_iter: 50,
            merit_penalty: 1.0,
            hessian: HessianMode::DampedBfgs,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_kkt > 0.0) {
            return Err(Error::config("controller.solver.tol_kkt", "must be > 0"));
        }
        if !(self.tol_feas > 0.0) {
            return Err(Error::config("controller.solver.tol_feas", "must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("controller.solver.max_iter", "must be >= 1"));
        }
        if !(self.merit_penalty > 0.0) {
            return Err(Error::config("controller.solver.merit_penalty", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub z: Vec<f64>,
    pub objective_value: f64,
    pub status: SolveStatus,
    pub kkt_residual: f64,
    /// Max violation over equalities, inequalities and bounds.
    pub constraint_violation: f64,
    pub iterations: usize,
    pub solve_time: f64,
    pub eq_multipliers: Vec<f64>,
    pub ineq_multipliers: Vec<f64>,
    /// `(before, after)` merit values of every accepted line-search step.
    pub merit_trace: Vec<(f64, f64)>,
}

/// Decision-vector layout of a receding-horizon program:
/// `[u_0 .. u_{N-1}, omega_0 .. omega_{M-1}, lambda blocks]`, where each
/// lambda block holds `M` consecutive per-step multiplier vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HorizonLayout {
    pub horizon: usize,
    pub control_dim: usize,
    pub safety_horizon: usize,
    /// Facet count of each obstacle's lambda block.
    pub lambda_blocks: Vec<usize>,
}

impl HorizonLayout {
    pub fn n_controls(&self) -> usize {
        self.horizon * self.control_dim
    }

    pub fn omega_offset(&self) -> usize {
        self.n_controls()
    }

    pub fn lambda_offset(&self) -> usize {
        self.n_controls() + self.safety_horizon
    }

    /// Start of the multiplier vector for obstacle `i` at safety step `k` (0-based).
    pub fn lambda_index(&self, i: usize, k: usize) -> usize {
        let before: usize = self.lambda_blocks[..i].iter().sum();
        self.lambda_offset() + before * self.safety_horizon + k * self.lambda_blocks[i]
    }

    pub fn n_vars(&self) -> usize {
        self.lambda_offset() + self.lambda_blocks.iter().sum::<usize>() * self.safety_horizon
    }
}

/// Shifts a previous solution one step forward in time; the last entry of every
/// per-step sequence is duplicated.
pub fn warm_start_shift(prev: &Solution, layout: &HorizonLayout) -> Result<Vec<f64>> {
    if prev.z.len() != layout.n_vars() {
        return Err(Error::invalid(format!(
            "solution has {} variables, layout expects {}",
            prev.z.len(),
            layout.n_vars()
        )));
    }
    let z = &prev.z;
    let mut out = z.clone();
    let shift = |out: &mut [f64], start: usize, steps: usize, width: usize| {
        for k in 0..steps {
            let src = (k + 1).min(steps - 1);
            for j in 0..width {
                out[start + k * width + j] = z[start + src * width + j];
            }
        }
    };
    if layout.horizon > 0 {
        shift(&mut out, 0, layout.horizon, layout.control_dim);
    }
    if layout.safety_horizon > 0 {
        shift(&mut out, layout.omega_offset(), layout.safety_horizon, 1);
        for (i, &s) in layout.lambda_blocks.iter().enumerate() {
            shift(&mut out, layout.lambda_index(i, 0), layout.safety_horizon, s);
        }
    }
    Ok(out)
}
