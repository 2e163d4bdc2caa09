use nalgebra::{DMatrix, DVector};

use super::horizon::{Horizon, Prediction};
use super::{ActiveObstacleSet, ConstraintMode, ControllerConfig};
use crate::distance::dual_distance;
use crate::dynamics::{BicycleParams, Control, State};
use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::solver::{HorizonLayout, NlpProblem};

#[derive(Debug, Clone)]
struct ObstacleTerm {
    poly: Polytope,
    /// `h_t` or `sqrt(h_t)` depending on the constraint mode.
    rhs: f64,
}

/// The MDD-I program at one time step, with states eliminated by forward
/// simulation. Decision vector layout follows [`HorizonLayout`].
#[derive(Debug, Clone)]
pub struct MddProblem {
    pub(crate) hz: Horizon,
    obstacles: Vec<ObstacleTerm>,
    layout: HorizonLayout,
    /// `gamma^(k+1)` for `k = 0..N_cbf`.
    decay: Vec<f64>,
    guess: Vec<f64>,
}

/// Builds the MDD-I program for the active obstacles at `x_t`.
pub fn build_mdd_step(
    x_t: &State,
    reference: &[State],
    act: &ActiveObstacleSet,
    cfg: &ControllerConfig,
    params: &BicycleParams,
) -> Result<MddProblem> {
    cfg.validate()?;
    params.validate()?;
    if reference.len() != cfg.horizon + 1 {
        return Err(Error::invalid(format!(
            "reference has {} states, expected N+1 = {}",
            reference.len(),
            cfg.horizon + 1
        )));
    }
    if !x_t.is_finite() {
        return Err(Error::invalid("state is not finite"));
    }
    let hz = Horizon::new(*x_t, reference, Control::default(), cfg, params);
    let obstacles: Vec<ObstacleTerm> = act
        .members
        .iter()
        .map(|o| ObstacleTerm {
            poly: o.polytope.clone(),
            rhs: match cfg.constraint_mode {
                ConstraintMode::PaperExact => o.h_t,
                ConstraintMode::UnitConsistent => o.h_t.sqrt(),
            },
        })
        .collect();
    let layout = HorizonLayout {
        horizon: cfg.horizon,
        control_dim: 2,
        safety_horizon: cfg.safety_horizon,
        lambda_blocks: obstacles.iter().map(|o| o.poly.facets()).collect(),
    };
    let decay = (0..cfg.safety_horizon).map(|k| cfg.gamma.powi(k as i32 + 1)).collect();
    let mut p = MddProblem {
        hz,
        obstacles,
        layout,
        decay,
        guess: Vec::new(),
    };
    p.guess = p.cold_guess(&vec![0.0; 2 * cfg.horizon]);
    Ok(p)
}

impl MddProblem {
    pub fn layout(&self) -> &HorizonLayout {
        &self.layout
    }

    pub fn n_obstacles(&self) -> usize {
        self.obstacles.len()
    }

    /// Previously applied control, used by the smoothness term at `k = 0`.
    pub fn with_previous_control(mut self, u: Control) -> Self {
        self.hz.prev_u = u;
        self
    }

    pub fn with_initial_guess(mut self, z: Vec<f64>) -> Result<Self> {
        if z.len() != self.layout.n_vars() {
            return Err(Error::invalid(format!(
                "initial guess has {} entries, layout needs {}",
                z.len(),
                self.layout.n_vars()
            )));
        }
        self.guess = z;
        Ok(self)
    }

    /// A guess built from `controls`: dual certificates at the predicted
    /// positions and the largest slacks those certificates allow (capped at 1).
    pub fn cold_guess(&self, controls: &[f64]) -> Vec<f64> {
        let n = self.hz.n();
        let m = self.hz.m();
        let mut z = vec![0.0; self.layout.n_vars()];
        z[..2 * n].copy_from_slice(controls);
        let pred = self.hz.predict(&z);
        let mut omega = vec![1.0f64; m];
        let now = self.hz.x0.position();
        for (i, o) in self.obstacles.iter().enumerate() {
            let fallback = dual_distance(&now, &o.poly).map(|r| r.1).unwrap_or_default();
            for k in 0..m {
                let p = pred.states[k + 1].position();
                let (g, lambda) = match dual_distance(&p, &o.poly) {
                    Ok((g, l)) if g > 0.0 => (g, l),
                    _ => (0.0, fallback.clone()),
                };
                let off = self.layout.lambda_index(i, k);
                z[off..off + lambda.len()].copy_from_slice(&lambda);
                let need = self.decay[k] * o.rhs;
                if need > 0.0 {
                    omega[k] = omega[k].min((g / need).max(0.0));
                }
            }
        }
        let off = self.layout.omega_offset();
        z[off..off + m].copy_from_slice(&omega);
        z
    }

    pub fn lambda<'a>(&self, z: &'a [f64], i: usize, k: usize) -> &'a [f64] {
        let off = self.layout.lambda_index(i, k);
        &z[off..off + self.obstacles[i].poly.facets()]
    }

    pub fn predicted_states(&self, z: &[f64]) -> Vec<State> {
        self.hz.predict(z).states
    }

    /// Avoidance constraint values `(A p_{k+1} - b)^T lambda - omega_k gamma^(k+1) RHS`,
    /// obstacle-major.
    pub fn avoidance_residuals(&self, z: &[f64]) -> Vec<f64> {
        let pred = self.hz.predict(z);
        let mut out = Vec::new();
        for i in 0..self.obstacles.len() {
            for k in 0..self.hz.m() {
                out.push(self.avoidance(z, &pred, i, k));
            }
        }
        out
    }

    fn avoidance(&self, z: &[f64], pred: &Prediction, i: usize, k: usize) -> f64 {
        let o = &self.obstacles[i];
        let slack = o.poly.slack(&pred.states[k + 1].position());
        let bound: f64 = slack.iter().zip(self.lambda(z, i, k)).map(|(s, l)| s * l).sum();
        bound - z[self.layout.omega_offset() + k] * self.decay[k] * o.rhs
    }

    pub fn polytope(&self, i: usize) -> &Polytope {
        &self.obstacles[i].poly
    }
}

impl NlpProblem for MddProblem {
    fn n_vars(&self) -> usize {
        self.layout.n_vars()
    }

    fn n_ineq(&self) -> usize {
        2 * self.obstacles.len() * self.hz.m() + 2 * self.hz.n()
    }

    fn objective(&self, z: &[f64]) -> f64 {
        self.hz.objective(z)
    }

    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        self.hz.gradient(z, self.n_vars())
    }

    fn residuals(&self, z: &[f64]) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let pred = self.hz.predict(z);
        Some(self.hz.residuals(z, &pred))
    }

    fn ineq_constraints(&self, z: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n_vars = self.n_vars();
        let m = self.hz.m();
        let n_obs = self.obstacles.len();
        let pred = self.hz.predict(z);
        let rows = self.n_ineq();
        let mut c = DVector::zeros(rows);
        let mut jac = DMatrix::zeros(rows, n_vars);
        let omega0 = self.layout.omega_offset();
        for (i, o) in self.obstacles.iter().enumerate() {
            for k in 0..m {
                let row = i * m + k;
                let p = pred.states[k + 1].position();
                let lambda = self.lambda(z, i, k);
                c[row] = self.avoidance(z, &pred, i, k);
                let w = o.poly.transpose_mul(lambda);
                for col in 0..2 * (k + 1) {
                    jac[(row, col)] = w.x * pred.sens[k + 1][(0, col)] + w.y * pred.sens[k + 1][(1, col)];
                }
                jac[(row, omega0 + k)] = -self.decay[k] * o.rhs;
                let off = self.layout.lambda_index(i, k);
                for (j, s) in o.poly.slack(&p).into_iter().enumerate() {
                    jac[(row, off + j)] = s;
                }

                let nrow = n_obs * m + i * m + k;
                c[nrow] = 1.0 - w.norm_squared();
                for (j, a) in o.poly.normals().iter().enumerate() {
                    jac[(nrow, off + j)] = -2.0 * a.dot(&w);
                }
            }
        }
        self.hz.velocity_rows(&pred, 2 * n_obs * m, &mut c, &mut jac);
        (c, jac)
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        self.hz.bounds(self.n_vars())
    }

    fn initial_guess(&self) -> Vec<f64> {
        self.guess.clone()
    }

    fn add_constraint_curvature(&self, _z: &[f64], ineq_mult: &[f64], h: &mut DMatrix<f64>) {
        let m = self.hz.m();
        let n_obs = self.obstacles.len();
        if ineq_mult.len() < 2 * n_obs * m {
            return;
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            let normals = o.poly.normals();
            for k in 0..m {
                let mu = ineq_mult[n_obs * m + i * m + k];
                if mu <= 0.0 {
                    continue;
                }
                let off = self.layout.lambda_index(i, k);
                for (a, na) in normals.iter().enumerate() {
                    for (b, nb) in normals.iter().enumerate() {
                        h[(off + a, off + b)] += 2.0 * mu * na.dot(nb);
                    }
                }
            }
        }
    }

    fn proximal_weights(&self) -> Option<Vec<f64>> {
        let mut w = vec![0.0; self.n_vars()];
        for v in &mut w[self.layout.lambda_offset()..] {
            *v = self.hz.cfg.lambda_prox;
        }
        Some(w)
    }
}
