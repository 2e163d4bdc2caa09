use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::qp::{solve_qp, QpError, QpProblem, QpSolution};
use super::{HessianMode, NlpProblem, Solution, SolveStatus, SolverOptions};

/// Multiplier magnitude above which the KKT residual is scaled down.
const MULT_SCALE: f64 = 100.0;
/// Cost of the elastic variable in infeasible subproblems, relative to the merit penalty.
const ELASTIC_WEIGHT: f64 = 1e3;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-10;

struct Eval {
    f: f64,
    grad: DVector<f64>,
    resid_jac: Option<DMatrix<f64>>,
    c_eq: DVector<f64>,
    j_eq: DMatrix<f64>,
    c_in: DVector<f64>,
    j_in: DMatrix<f64>,
}

impl Eval {
    fn at(p: &dyn NlpProblem, z: &[f64], want_resid: bool) -> Option<Eval> {
        let f = p.objective(z);
        let grad = p.gradient(z);
        let resid_jac = if want_resid {
            p.residuals(z).map(|(_, j)| j)
        } else {
            None
        };
        let (c_eq, j_eq) = p.eq_constraints(z);
        let (c_in, j_in) = p.ineq_constraints(z);
        let finite = f.is_finite()
            && grad.iter().all(|v| v.is_finite())
            && c_eq.iter().chain(c_in.iter()).all(|v| v.is_finite())
            && j_eq.iter().chain(j_in.iter()).all(|v| v.is_finite())
            && resid_jac.as_ref().map_or(true, |j| j.iter().all(|v| v.is_finite()));
        finite.then_some(Eval {
            f,
            grad,
            resid_jac,
            c_eq,
            j_eq,
            c_in,
            j_in,
        })
    }

    fn l1_violation(&self) -> f64 {
        self.c_eq.iter().map(|v| v.abs()).sum::<f64>() + self.c_in.iter().map(|v| (-v).max(0.0)).sum::<f64>()
    }

    fn max_violation(&self) -> f64 {
        self.c_eq
            .iter()
            .map(|v| v.abs())
            .chain(self.c_in.iter().map(|v| (-v).max(0.0)))
            .fold(0.0, f64::max)
    }
}

/// Trial-point merit: objective and l1 constraint violation only.
fn merit_at(p: &dyn NlpProblem, z: &[f64], nu: f64) -> f64 {
    let f = p.objective(z);
    let (c_eq, _) = p.eq_constraints(z);
    let (c_in, _) = p.ineq_constraints(z);
    let viol = c_eq.iter().map(|v| v.abs()).sum::<f64>() + c_in.iter().map(|v| (-v).max(0.0)).sum::<f64>();
    let m = f + nu * viol;
    if m.is_finite() {
        m
    } else {
        f64::INFINITY
    }
}

struct Certificate {
    kkt: f64,
    max_mult: f64,
}

fn certificate(e: &Eval, z: &[f64], lo: &[f64], hi: &[f64], qp: &QpSolution) -> Certificate {
    let mut stat = e.grad.clone() - e.j_eq.transpose() * &qp.eq_mult - e.j_in.transpose() * &qp.ineq_mult;
    let mut comp: f64 = 0.0;
    let mut mult_sum = 0.0;
    let mut mult_count = 0usize;
    let mut max_mult: f64 = 0.0;
    for j in 0..z.len() {
        stat[j] += qp.upper_mult[j] - qp.lower_mult[j];
        if lo[j].is_finite() {
            comp = comp.max(qp.lower_mult[j] * (z[j] - lo[j]).abs());
        }
        if hi[j].is_finite() {
            comp = comp.max(qp.upper_mult[j] * (hi[j] - z[j]).abs());
        }
        mult_sum += qp.upper_mult[j] + qp.lower_mult[j];
        mult_count += 2;
    }
    for (m, c) in qp.ineq_mult.iter().zip(e.c_in.iter()) {
        comp = comp.max((m * c.max(0.0)).abs());
        mult_sum += m.abs();
        max_mult = max_mult.max(m.abs());
    }
    for y in qp.eq_mult.iter() {
        mult_sum += y.abs();
        max_mult = max_mult.max(y.abs());
    }
    mult_count += qp.ineq_mult.len() + qp.eq_mult.len();
    let s_d = if mult_count > 0 {
        (mult_sum / mult_count as f64).max(MULT_SCALE) / MULT_SCALE
    } else {
        1.0
    };
    let stat_norm = stat.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Certificate {
        kkt: stat_norm.max(comp) / s_d,
        max_mult,
    }
}

fn lagrangian_grad(e: &Eval, qp: &QpSolution) -> DVector<f64> {
    e.grad.clone() - e.j_eq.transpose() * &qp.eq_mult - e.j_in.transpose() * &qp.ineq_mult
}

/// Solves the subproblem; when the linearization is inconsistent, retries
/// with a single elastic variable `t in [0, 1]` that scales back the
/// violated linearized constraints. Returns the solution and `t`.
fn subproblem(qp: &QpProblem, e: &Eval, nu: f64) -> Result<(QpSolution, f64), QpError> {
    let mut qp = qp.clone();
    let diag_max = qp.h.diagonal().amax();
    let mut reg = 0.0;
    for attempt in 0..6 {
        if attempt > 0 {
            reg = if reg == 0.0 { 1e-8 * (1.0 + diag_max) } else { reg * 100.0 };
            for i in 0..qp.h.nrows() {
                qp.h[(i, i)] += reg;
            }
        }
        match solve_qp(&qp) {
            Ok(s) => return Ok((s, 0.0)),
            Err(QpError::Numerical) => continue,
            Err(QpError::Infeasible) => return elastic(&qp, e, nu),
            Err(err) => return Err(err),
        }
    }
    Err(QpError::Numerical)
}

fn elastic(qp: &QpProblem, e: &Eval, nu: f64) -> Result<(QpSolution, f64), QpError> {
    let n = qp.g.len();
    let mut h = DMatrix::zeros(n + 1, n + 1);
    h.view_mut((0, 0), (n, n)).copy_from(&qp.h);
    h[(n, n)] = 1.0;
    let mut g = DVector::zeros(n + 1);
    g.rows_mut(0, n).copy_from(&qp.g);
    g[n] = ELASTIC_WEIGHT * nu.max(1.0);
    let mut a_eq = DMatrix::zeros(qp.a_eq.nrows(), n + 1);
    a_eq.view_mut((0, 0), (qp.a_eq.nrows(), n)).copy_from(&qp.a_eq);
    for i in 0..qp.a_eq.nrows() {
        a_eq[(i, n)] = -e.c_eq[i];
    }
    let mut a_in = DMatrix::zeros(qp.a_in.nrows(), n + 1);
    a_in.view_mut((0, 0), (qp.a_in.nrows(), n)).copy_from(&qp.a_in);
    for i in 0..qp.a_in.nrows() {
        a_in[(i, n)] = (-e.c_in[i]).max(0.0);
    }
    let mut lo = qp.lo.clone();
    lo.push(0.0);
    let mut hi = qp.hi.clone();
    hi.push(1.0);
    let ext = QpProblem {
        h,
        g,
        a_eq,
        b_eq: qp.b_eq.clone(),
        a_in,
        b_in: qp.b_in.clone(),
        lo,
        hi,
    };
    let s = solve_qp(&ext)?;
    let t = s.d[n];
    Ok((
        QpSolution {
            d: s.d.rows(0, n).into_owned(),
            eq_mult: s.eq_mult,
            ineq_mult: s.ineq_mult,
            lower_mult: s.lower_mult[..n].to_vec(),
            upper_mult: s.upper_mult[..n].to_vec(),
        },
        t,
    ))
}

fn damped_bfgs(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if !(sbs > 1e-16) {
        return;
    }
    let sy = s.dot(y);
    let theta = if sy >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sy) };
    let r = y * theta + &bs * (1.0 - theta);
    let sr = s.dot(&r);
    if !(sr > 1e-16) {
        return;
    }
    *b += &r * r.transpose() / sr - &bs * bs.transpose() / sbs;
}

/// Runs SQP from the problem's initial guess (projected onto the bounds).
pub fn sqp_solve(p: &dyn NlpProblem, opts: &SolverOptions) -> Solution {
    let started = Instant::now();
    let n = p.n_vars();
    let (lo, hi) = p.bounds();
    let mut z: Vec<f64> = p
        .initial_guess()
        .iter()
        .zip(lo.iter().zip(&hi))
        .map(|(v, (l, h))| v.clamp(*l, *h))
        .collect();

    let mut use_gn = opts.hessian == HessianMode::GaussNewton && p.residuals(&z).is_some();
    let prox = p.proximal_weights();
    let mut bfgs = DMatrix::<f64>::identity(n, n);
    let mut nu = opts.merit_penalty;
    let mut ineq_mult = vec![0.0; p.n_ineq()];
    let mut merit_trace = Vec::new();

    let finish = |z: Vec<f64>, e: Option<&Eval>, status, kkt, iterations, eq_m, in_m, trace| Solution {
        objective_value: e.map_or(f64::NAN, |e| e.f),
        constraint_violation: e.map_or(f64::INFINITY, |e| e.max_violation()),
        z,
        status,
        kkt_residual: kkt,
        iterations,
        solve_time: started.elapsed().as_secs_f64(),
        eq_multipliers: eq_m,
        ineq_multipliers: in_m,
        merit_trace: trace,
    };

    let Some(mut e) = Eval::at(p, &z, use_gn) else {
        return finish(z, None, SolveStatus::NumericalFailure, f64::INFINITY, 0, vec![], vec![], merit_trace);
    };
    let mut last_kkt = f64::INFINITY;
    let mut eq_mult_out = vec![0.0; p.n_eq()];
    let mut stalled = false;

    for iter in 0..=opts.max_iter {
        let mut h = match (&e.resid_jac, use_gn) {
            (Some(j), true) => {
                let k = j.ncols();
                let mut h = DMatrix::zeros(n, n);
                h.view_mut((0, 0), (k, k)).copy_from(&(j.tr_mul(j) * 2.0));
                p.add_constraint_curvature(&z, &ineq_mult, &mut h);
                h
            }
            _ => bfgs.clone(),
        };
        if let Some(w) = &prox {
            for i in 0..n {
                h[(i, i)] += w[i];
            }
        }
        let floor = 1e-10 * (1.0 + h.diagonal().amax());
        for i in 0..n {
            h[(i, i)] += floor;
        }
        let qp = QpProblem {
            h,
            g: e.grad.clone(),
            a_eq: e.j_eq.clone(),
            b_eq: -&e.c_eq,
            a_in: e.j_in.clone(),
            b_in: -&e.c_in,
            lo: lo.iter().zip(&z).map(|(l, v)| l - v).collect(),
            hi: hi.iter().zip(&z).map(|(h, v)| h - v).collect(),
        };
        let (sub, t) = match subproblem(&qp, &e, nu) {
            Ok(s) => s,
            Err(_) => {
                let status = if e.max_violation() > opts.tol_feas {
                    SolveStatus::Infeasible
                } else {
                    SolveStatus::NumericalFailure
                };
                return finish(z, Some(&e), status, last_kkt, iter, eq_mult_out, ineq_mult, merit_trace);
            }
        };

        let cert = certificate(&e, &z, &lo, &hi, &sub);
        last_kkt = cert.kkt;
        let viol = e.max_violation();
        if t == 0.0 {
            ineq_mult = sub.ineq_mult.iter().copied().collect();
            eq_mult_out = sub.eq_mult.iter().copied().collect();
        }
        if t == 0.0 && cert.kkt <= opts.tol_kkt && viol <= opts.tol_feas {
            return finish(z, Some(&e), SolveStatus::Optimal, cert.kkt, iter, eq_mult_out, ineq_mult, merit_trace);
        }
        if iter == opts.max_iter || stalled {
            let status = if t > 1.0 - 1e-9 && viol > opts.tol_feas {
                SolveStatus::Infeasible
            } else {
                SolveStatus::MaxIter
            };
            return finish(z, Some(&e), status, cert.kkt, iter, eq_mult_out, ineq_mult, merit_trace);
        }

        if t == 0.0 {
            nu = nu.max(1.5 * cert.max_mult + 1e-3);
        }
        let l1 = e.l1_violation();
        let phi = e.f + nu * l1;
        let d = &sub.d;
        let mut slope = e.grad.dot(d) - nu * (1.0 - t) * l1;
        if !(slope < 0.0) {
            slope = -1e-3 * d.dot(d);
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= MIN_STEP {
            let trial: Vec<f64> = z
                .iter()
                .zip(d.iter())
                .zip(lo.iter().zip(&hi))
                .map(|((zi, di), (l, h))| (zi + alpha * di).clamp(*l, *h))
                .collect();
            let phi_t = merit_at(p, &trial, nu);
            if phi_t <= phi + ARMIJO * alpha * slope {
                accepted = Some((trial, phi_t));
                break;
            }
            alpha *= 0.5;
        }
        let Some((z_new, phi_new)) = accepted else {
            if !use_gn && bfgs != DMatrix::identity(n, n) {
                bfgs = DMatrix::identity(n, n);
                continue;
            }
            stalled = true;
            continue;
        };
        let Some(e_new) = Eval::at(p, &z_new, use_gn) else {
            return finish(z_new, None, SolveStatus::NumericalFailure, last_kkt, iter + 1, eq_mult_out, ineq_mult, merit_trace);
        };
        merit_trace.push((phi, phi_new));

        if !use_gn {
            let s = DVector::from_iterator(n, z_new.iter().zip(&z).map(|(a, b)| a - b));
            let y = lagrangian_grad(&e_new, &sub) - lagrangian_grad(&e, &sub);
            damped_bfgs(&mut bfgs, &s, &y);
        }
        if use_gn && e_new.resid_jac.is_none() {
            use_gn = false;
        }
        z = z_new;
        e = e_new;
    }
    unreachable!("loop returns on its final iteration")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// min |z - c|^2 with z >= 0, via bounds.
    struct Orthant;

    impl NlpProblem for Orthant {
        fn n_vars(&self) -> usize {
            2
        }
        fn objective(&self, z: &[f64]) -> f64 {
            (z[0] - 1.0).powi(2) + (z[1] + 1.0).powi(2)
        }
        fn gradient(&self, z: &[f64]) -> DVector<f64> {
            DVector::from_vec(vec![2.0 * (z[0] - 1.0), 2.0 * (z[1] + 1.0)])
        }
        fn residuals(&self, z: &[f64]) -> Option<(DVector<f64>, DMatrix<f64>)> {
            Some((DVector::from_vec(vec![z[0] - 1.0, z[1] + 1.0]), DMatrix::identity(2, 2)))
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![0.0, 0.0], vec![f64::INFINITY; 2])
        }
        fn initial_guess(&self) -> Vec<f64> {
            vec![3.0, 3.0]
        }
    }

    #[test]
    fn orthant_projection_both_hessians() {
        for hessian in [HessianMode::GaussNewton, HessianMode::DampedBfgs] {
            let opts = SolverOptions {
                hessian,
                ..Default::default()
            };
            let s = sqp_solve(&Orthant, &opts);
            assert_eq!(s.status, SolveStatus::Optimal, "{hessian:?}");
            assert!((s.z[0] - 1.0).abs() < 1e-8 && s.z[1].abs() < 1e-8);
            assert!((s.objective_value - 1.0).abs() < 1e-8);
            assert!(s.kkt_residual <= 1e-6);
        }
    }

    struct NanProblem;

    impl NlpProblem for NanProblem {
        fn n_vars(&self) -> usize {
            1
        }
        fn objective(&self, z: &[f64]) -> f64 {
            if z[0] < 0.5 {
                f64::NAN
            } else {
                (z[0] - 0.0).powi(2)
            }
        }
        fn gradient(&self, z: &[f64]) -> DVector<f64> {
            DVector::from_vec(vec![2.0 * z[0]])
        }
        fn initial_guess(&self) -> Vec<f64> {
            vec![f64::NAN]
        }
    }

    #[test]
    fn non_finite_callback_reports_numerical_failure() {
        let s = sqp_solve(&NanProblem, &SolverOptions::default());
        assert_eq!(s.status, SolveStatus::NumericalFailure);
        assert!(s.z[0].is_nan());
    }
}
