//! Convex QP subproblems, solved with the Clarabel interior-point method.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// `min 1/2 d'Hd + g'd  s.t.  A_eq d = b_eq,  A_in d >= b_in,  lo <= d <= hi`.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Primal step and multipliers, signed so that
/// `H d + g - A_eq' y - A_in' mu - nu_lo + nu_hi = 0`.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub d: DVector<f64>,
    pub eq_mult: DVector<f64>,
    pub ineq_mult: DVector<f64>,
    pub lower_mult: Vec<f64>,
    pub upper_mult: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QpError {
    #[error("quadratic subproblem is infeasible")]
    Infeasible,
    #[error("quadratic subproblem is unbounded or numerically singular")]
    Numerical,
    #[error("inconsistent subproblem dimensions")]
    Dimension,
}

/// Column-major sparse copy of the rows pushed so far.
struct Rows {
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

impl Rows {
    fn new(n: usize) -> Self {
        Self {
            n,
            cols: vec![Vec::new(); n],
            rhs: Vec::new(),
        }
    }

    fn push(&mut self, entries: impl Iterator<Item = (usize, f64)>, rhs: f64) -> usize {
        let r = self.rhs.len();
        for (j, v) in entries {
            if v != 0.0 {
                self.cols[j].push((r, v));
            }
        }
        self.rhs.push(rhs);
        r
    }

    fn csc(self) -> (CscMatrix<f64>, Vec<f64>) {
        let mut colptr = vec![0];
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        for col in &self.cols {
            for &(r, v) in col {
                rowval.push(r);
                nzval.push(v);
            }
            colptr.push(rowval.len());
        }
        (CscMatrix::new(self.rhs.len(), self.n, colptr, rowval, nzval), self.rhs)
    }
}

fn upper_triangle(h: &DMatrix<f64>) -> CscMatrix<f64> {
    let n = h.nrows();
    let mut colptr = vec![0];
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    for j in 0..n {
        for i in 0..=j {
            let v = 0.5 * (h[(i, j)] + h[(j, i)]);
            if v != 0.0 {
                rowval.push(i);
                nzval.push(v);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(n, n, colptr, rowval, nzval)
}

pub fn solve_qp(p: &QpProblem) -> Result<QpSolution, QpError> {
    let n = p.g.len();
    if p.h.nrows() != n
        || p.h.ncols() != n
        || p.a_eq.ncols() != n
        || p.a_in.ncols() != n
        || p.a_eq.nrows() != p.b_eq.len()
        || p.a_in.nrows() != p.b_in.len()
        || p.lo.len() != n
        || p.hi.len() != n
    {
        return Err(QpError::Dimension);
    }
    let meq = p.a_eq.nrows();
    let m_in = p.a_in.nrows();

    // Clarabel form: A x + s = b with s in {0} for equalities and s >= 0 otherwise.
    let mut rows = Rows::new(n);
    for i in 0..meq {
        rows.push(p.a_eq.row(i).iter().copied().enumerate(), p.b_eq[i]);
    }
    for i in 0..m_in {
        rows.push(p.a_in.row(i).iter().map(|v| -v).enumerate(), -p.b_in[i]);
    }
    let mut upper_rows = Vec::new();
    let mut lower_rows = Vec::new();
    for j in 0..n {
        if p.hi[j].is_finite() {
            upper_rows.push((j, rows.push(std::iter::once((j, 1.0)), p.hi[j])));
        }
        if p.lo[j].is_finite() {
            lower_rows.push((j, rows.push(std::iter::once((j, -1.0)), -p.lo[j])));
        }
    }
    let m = rows.rhs.len();
    let (a, b) = rows.csc();
    let mut cones = Vec::new();
    if meq > 0 {
        cones.push(SupportedConeT::ZeroConeT(meq));
    }
    if m > meq {
        cones.push(SupportedConeT::NonnegativeConeT(m - meq));
    }
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .presolve_enable(false)
        .tol_gap_abs(1e-11)
        .tol_gap_rel(1e-11)
        .tol_feas(1e-11)
        .tol_ktratio(1e-9)
        .max_iter(200)
        .build()
        .map_err(|_| QpError::Numerical)?;
    let mut solver = DefaultSolver::new(&upper_triangle(&p.h), p.g.as_slice(), &a, &b, &cones, settings)
        .map_err(|_| QpError::Dimension)?;
    solver.solve();
    let sol = &solver.solution;
    match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {}
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => return Err(QpError::Infeasible),
        _ => return Err(QpError::Numerical),
    }
    if sol.x.iter().chain(sol.z.iter()).any(|v| !v.is_finite()) {
        return Err(QpError::Numerical);
    }

    let d = DVector::from_column_slice(&sol.x);
    let eq_mult = DVector::from_iterator(meq, (0..meq).map(|i| -sol.z[i]));
    let ineq_mult = DVector::from_iterator(m_in, (0..m_in).map(|i| sol.z[meq + i].max(0.0)));
    let mut lower_mult = vec![0.0; n];
    let mut upper_mult = vec![0.0; n];
    for &(j, r) in &upper_rows {
        upper_mult[j] = sol.z[r].max(0.0);
    }
    for &(j, r) in &lower_rows {
        lower_mult[j] = sol.z[r].max(0.0);
    }
    Ok(QpSolution {
        d,
        eq_mult,
        ineq_mult,
        lower_mult,
        upper_mult,
    })
}
