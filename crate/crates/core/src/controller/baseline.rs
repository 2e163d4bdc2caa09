use nalgebra::{DMatrix, DVector};

use super::horizon::Horizon;
use super::ControllerConfig;
use crate::dynamics::{BicycleParams, Control, State};
use crate::error::{Error, Result};
use crate::geometry::{Circle, Point};
use crate::solver::NlpProblem;

/// `h(p) = ||p - c||^2 - r^2`.
pub fn circle_barrier(p: &Point, c: &Circle) -> f64 {
    (p - c.center).norm_squared() - c.radius * c.radius
}

/// The MPC-DCBF program with closed-form circle barriers,
/// `h(x_{k+1}) >= omega_k gamma h(x_k)`.
#[derive(Debug, Clone)]
pub struct BaselineProblem {
    pub(crate) hz: Horizon,
    circles: Vec<Circle>,
    guess: Vec<f64>,
}

pub fn build_baseline_step(
    x_t: &State,
    reference: &[State],
    circles: &[Circle],
    cfg: &ControllerConfig,
    params: &BicycleParams,
) -> Result<BaselineProblem> {
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
    let mut guess = vec![0.0; hz.n_core()];
    for w in &mut guess[2 * cfg.horizon..] {
        *w = 1.0;
    }
    Ok(BaselineProblem {
        hz,
        circles: circles.to_vec(),
        guess,
    })
}

impl BaselineProblem {
    pub fn with_previous_control(mut self, u: Control) -> Self {
        self.hz.prev_u = u;
        self
    }

    pub fn with_initial_guess(mut self, z: Vec<f64>) -> Result<Self> {
        if z.len() != self.guess.len() {
            return Err(Error::invalid(format!(
                "initial guess has {} entries, expected {}",
                z.len(),
                self.guess.len()
            )));
        }
        self.guess = z;
        Ok(self)
    }

    pub fn circles(&self) -> &[Circle] {
        &self.circles
    }

    pub fn predicted_states(&self, z: &[f64]) -> Vec<State> {
        self.hz.predict(z).states
    }

    /// Constraint values `h(x_{k+1}) - omega_k gamma h(x_k)`, circle-major.
    pub fn barrier_residuals(&self, z: &[f64]) -> Vec<f64> {
        self.ineq_constraints(z).0.as_slice()[..self.circles.len() * self.hz.m()].to_vec()
    }
}

impl NlpProblem for BaselineProblem {
    fn n_vars(&self) -> usize {
        self.hz.n_core()
    }

    fn n_ineq(&self) -> usize {
        self.circles.len() * self.hz.m() + 2 * self.hz.n()
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
        let n = self.hz.n();
        let m = self.hz.m();
        let gamma = self.hz.cfg.gamma;
        let pred = self.hz.predict(z);
        let rows = self.n_ineq();
        let mut c = DVector::zeros(rows);
        let mut jac = DMatrix::zeros(rows, self.n_vars());
        for (i, circ) in self.circles.iter().enumerate() {
            for k in 0..m {
                let row = i * m + k;
                let omega = z[2 * n + k];
                let p_next = pred.states[k + 1].position();
                let p_now = pred.states[k].position();
                let h_now = circle_barrier(&p_now, circ);
                c[row] = circle_barrier(&p_next, circ) - omega * gamma * h_now;
                let dn = (p_next - circ.center) * 2.0;
                let dc = (p_now - circ.center) * 2.0;
                for col in 0..2 * (k + 1) {
                    let s1 = &pred.sens[k + 1];
                    let s0 = &pred.sens[k];
                    jac[(row, col)] = dn.x * s1[(0, col)] + dn.y * s1[(1, col)]
                        - omega * gamma * (dc.x * s0[(0, col)] + dc.y * s0[(1, col)]);
                }
                jac[(row, 2 * n + k)] = -gamma * h_now;
            }
        }
        self.hz.velocity_rows(&pred, self.circles.len() * m, &mut c, &mut jac);
        (c, jac)
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        self.hz.bounds(self.n_vars())
    }

    fn initial_guess(&self) -> Vec<f64> {
        self.guess.clone()
    }
}
