//! Single-shooting prediction and the tracking cost shared by both controllers.

use nalgebra::{DMatrix, DVector};

use super::ControllerConfig;
use crate::dynamics::{bicycle_step_raw, BicycleParams, Control, State};
use crate::geometry::normalize_angle;

/// Predicted states and their sensitivities `d x_k / d U` (4 x 2N each).
pub(crate) struct Prediction {
    pub states: Vec<State>,
    pub sens: Vec<DMatrix<f64>>,
}

/// Everything about one receding-horizon program except the obstacles.
#[derive(Debug, Clone)]
pub(crate) struct Horizon {
    pub x0: State,
    /// Reference with headings unwrapped around `x0.theta`.
    pub reference: Vec<State>,
    pub prev_u: Control,
    pub cfg: ControllerConfig,
    pub params: BicycleParams,
}

impl Horizon {
    pub fn new(x0: State, reference: &[State], prev_u: Control, cfg: &ControllerConfig, params: &BicycleParams) -> Self {
        let mut unwrapped = reference.to_vec();
        for k in 0..unwrapped.len() {
            let (base, delta) = if k == 0 {
                (x0.theta, reference[0].theta - x0.theta)
            } else {
                (unwrapped[k - 1].theta, reference[k].theta - reference[k - 1].theta)
            };
            unwrapped[k].theta = base + normalize_angle(delta);
        }
        Self {
            x0,
            reference: unwrapped,
            prev_u,
            cfg: cfg.clone(),
            params: *params,
        }
    }

    pub fn n(&self) -> usize {
        self.cfg.horizon
    }

    pub fn m(&self) -> usize {
        self.cfg.safety_horizon
    }

    /// Columns touched by the tracking cost: controls and slacks.
    pub fn n_core(&self) -> usize {
        2 * self.n() + self.m()
    }

    pub fn predict(&self, z: &[f64]) -> Prediction {
        let n = self.n();
        let p = &self.params;
        let dt = p.dt;
        let mut states = Vec::with_capacity(n + 1);
        let mut sens = Vec::with_capacity(n + 1);
        states.push(self.x0);
        sens.push(DMatrix::zeros(4, 2 * n));
        for k in 0..n {
            let s = states[k];
            let u = Control::new(z[2 * k], z[2 * k + 1]);
            let (sin, cos) = s.theta.sin_cos();
            let tan = u.delta.tan();
            // F_x, rows x, y, v, theta; columns x, y, v, theta
            let fx = nalgebra::Matrix4::new(
                1.0, 0.0, cos * dt, -s.v * sin * dt,
                0.0, 1.0, sin * dt, s.v * cos * dt,
                0.0, 0.0, 1.0, 0.0,
                0.0, 0.0, tan / p.wheelbase * dt, 1.0,
            );
            let mut next = DMatrix::zeros(4, 2 * n);
            let prev = &sens[k];
            for c in 0..2 * k {
                for r in 0..4 {
                    let mut acc = 0.0;
                    for j in 0..4 {
                        acc += fx[(r, j)] * prev[(j, c)];
                    }
                    next[(r, c)] = acc;
                }
            }
            next[(2, 2 * k)] = dt;
            next[(3, 2 * k + 1)] = s.v * (1.0 + tan * tan) / p.wheelbase * dt;
            states.push(bicycle_step_raw(&s, &u, p));
            sens.push(next);
        }
        Prediction { states, sens }
    }

    /// Least-squares residuals of the cost and their Jacobian over the
    /// leading `n_core` columns. The objective is `r . r`.
    pub fn residuals(&self, z: &[f64], pred: &Prediction) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n();
        let m = self.m();
        let cfg = &self.cfg;
        let rows = 4 * n + 4 * n + m;
        let cols = self.n_core();
        let mut r = DVector::zeros(rows);
        let mut j = DMatrix::zeros(rows, cols);
        let mut row = 0;
        for k in 1..=n {
            let w = if k == n { &cfg.terminal_weights } else { &cfg.state_weights };
            let e = [
                pred.states[k].x - self.reference[k].x,
                pred.states[k].y - self.reference[k].y,
                pred.states[k].v - self.reference[k].v,
                pred.states[k].theta - self.reference[k].theta,
            ];
            for c in 0..4 {
                let sw = w[c].sqrt();
                r[row] = sw * e[c];
                for col in 0..2 * k {
                    j[(row, col)] = sw * pred.sens[k][(c, col)];
                }
                row += 1;
            }
        }
        for k in 0..n {
            for c in 0..2 {
                let sw = cfg.control_weights[c].sqrt();
                r[row] = sw * z[2 * k + c];
                j[(row, 2 * k + c)] = sw;
                row += 1;
            }
        }
        for k in 0..n {
            for c in 0..2 {
                let sw = cfg.smoothness_weights[c].sqrt();
                let prev = if k == 0 {
                    [self.prev_u.a, self.prev_u.delta][c]
                } else {
                    z[2 * (k - 1) + c]
                };
                r[row] = sw * (z[2 * k + c] - prev);
                j[(row, 2 * k + c)] = sw;
                if k > 0 {
                    j[(row, 2 * (k - 1) + c)] = -sw;
                }
                row += 1;
            }
        }
        let sp = cfg.p_omega.sqrt();
        for k in 0..m {
            r[row] = sp * (z[2 * n + k] - 1.0);
            j[(row, 2 * n + k)] = sp;
            row += 1;
        }
        (r, j)
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        let pred = self.predict(z);
        let (r, _) = self.residuals(z, &pred);
        r.norm_squared()
    }

    pub fn gradient(&self, z: &[f64], n_vars: usize) -> DVector<f64> {
        let pred = self.predict(z);
        let (r, j) = self.residuals(z, &pred);
        let core = j.tr_mul(&r) * 2.0;
        let mut g = DVector::zeros(n_vars);
        g.rows_mut(0, core.len()).copy_from(&core);
        g
    }

    /// `v_k - v_min >= 0` and `v_max - v_k >= 0` for `k = 1..N`, written into
    /// `2N` rows starting at `row0`.
    pub fn velocity_rows(&self, pred: &Prediction, row0: usize, c: &mut DVector<f64>, jac: &mut DMatrix<f64>) {
        let n = self.n();
        for k in 1..=n {
            let v = pred.states[k].v;
            let lo = row0 + 2 * (k - 1);
            c[lo] = v - self.params.v_min;
            c[lo + 1] = self.params.v_max - v;
            for col in 0..2 * k {
                let d = pred.sens[k][(2, col)];
                jac[(lo, col)] = d;
                jac[(lo + 1, col)] = -d;
            }
        }
    }

    /// Bounds on controls and slacks; the remaining `n_vars - n_core` entries get `[0, inf)`.
    pub fn bounds(&self, n_vars: usize) -> (Vec<f64>, Vec<f64>) {
        let p = &self.params;
        let mut lo = Vec::with_capacity(n_vars);
        let mut hi = Vec::with_capacity(n_vars);
        for _ in 0..self.n() {
            lo.extend([-p.a_max, -p.delta_max]);
            hi.extend([p.a_max, p.delta_max]);
        }
        lo.resize(n_vars, 0.0);
        hi.resize(n_vars, f64::INFINITY);
        (lo, hi)
    }
}
