//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use safenav::geometry::{Point, Polytope, Pose2D};
use safenav::solver::NlpProblem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- polygons

/// Random convex polygon with 3..=8 vertices on a circle, returned both as its
/// vertex list (counter-clockwise) and as half-planes.
pub fn random_polygon(r: &mut ChaCha8Rng) -> (Vec<Point>, Polytope) {
    loop {
        let n = r.random_range(3..=8usize);
        let c = Point::new(r.random_range(-5.0..5.0), r.random_range(-5.0..5.0));
        let radius = r.random_range(0.5..4.0);
        let mut ang: Vec<f64> = (0..n).map(|_| r.random_range(0.0..2.0 * PI)).collect();
        ang.sort_by(f64::total_cmp);
        let gap = (0..n)
            .map(|i| if i + 1 < n { ang[i + 1] - ang[i] } else { ang[0] + 2.0 * PI - ang[n - 1] })
            .fold(0.0, f64::max);
        // Keep vertices well separated and the polygon well inside its circle.
        let min_gap = (0..n)
            .map(|i| if i + 1 < n { ang[i + 1] - ang[i] } else { ang[0] + 2.0 * PI - ang[n - 1] })
            .fold(f64::INFINITY, f64::min);
        if gap > 0.9 * PI || min_gap < 0.05 {
            continue;
        }
        let verts: Vec<Point> = ang.iter().map(|a| c + radius * Point::new(a.cos(), a.sin())).collect();
        let mut rows = Vec::with_capacity(n);
        let mut offs = Vec::with_capacity(n);
        for i in 0..n {
            let (v, w) = (verts[i], verts[(i + 1) % n]);
            let e = w - v;
            let normal = Point::new(e.y, -e.x);
            rows.push(normal);
            offs.push(normal.dot(&v));
        }
        let poly = Polytope::new(rows, offs).expect("valid polygon");
        return (verts, poly);
    }
}

pub fn segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + t * ab)).norm()
}

/// Euclidean distance from `p` to a counter-clockwise convex polygon (0 inside).
pub fn polygon_distance(p: &Point, verts: &[Point]) -> f64 {
    let n = verts.len();
    let inside = (0..n).all(|i| {
        let (a, b) = (verts[i], verts[(i + 1) % n]);
        let e = b - a;
        e.x * (p.y - a.y) - e.y * (p.x - a.x) >= 0.0
    });
    if inside {
        return 0.0;
    }
    (0..n)
        .map(|i| segment_distance(p, &verts[i], &verts[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Point at distance in `[lo, hi]` outside the polygon, sampled by rejection.
pub fn exterior_point(r: &mut ChaCha8Rng, verts: &[Point], lo: f64, hi: f64) -> Point {
    let c = verts.iter().sum::<Point>() / verts.len() as f64;
    loop {
        let p = c + Point::new(r.random_range(-12.0..12.0), r.random_range(-12.0..12.0));
        let d = polygon_distance(&p, verts);
        if d >= lo && d <= hi {
            return p;
        }
    }
}

// ------------------------------------------------------------------ Dubins

fn m2pi(x: f64) -> f64 {
    x.rem_euclid(2.0 * PI)
}

/// Closed-form normalized parameters `(t, p, q)` for each of the six words,
/// in the order LSL, RSR, LSR, RSL, RLR, LRL.
pub fn dubins_words(q0: Pose2D, q1: Pose2D, r: f64) -> [Option<[f64; 3]>; 6] {
    let (dx, dy) = (q1.x - q0.x, q1.y - q0.y);
    let d = dx.hypot(dy) / r;
    let th = if d > 0.0 { dy.atan2(dx) } else { 0.0 };
    let a = m2pi(q0.theta - th);
    let b = m2pi(q1.theta - th);
    let (sa, ca, sb, cb) = (a.sin(), a.cos(), b.sin(), b.cos());
    let cab = (a - b).cos();

    let lsl = {
        let p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb);
        (p2 >= 0.0).then(|| {
            let tmp = (cb - ca).atan2(d + sa - sb);
            [m2pi(-a + tmp), p2.sqrt(), m2pi(b - tmp)]
        })
    };
    let rsr = {
        let p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa);
        (p2 >= 0.0).then(|| {
            let tmp = (ca - cb).atan2(d - sa + sb);
            [m2pi(a - tmp), p2.sqrt(), m2pi(-b + tmp)]
        })
    };
    let lsr = {
        let p2 = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb);
        (p2 >= 0.0).then(|| {
            let p = p2.sqrt();
            let tmp = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
            [m2pi(-a + tmp), p, m2pi(-b + tmp)]
        })
    };
    let rsl = {
        let p2 = d * d - 2.0 + 2.0 * cab - 2.0 * d * (sa + sb);
        (p2 >= 0.0).then(|| {
            let p = p2.sqrt();
            let tmp = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
            [m2pi(a - tmp), p, m2pi(b - tmp)]
        })
    };
    let rlr = {
        let c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0;
        (c.abs() <= 1.0).then(|| {
            let p = m2pi(2.0 * PI - c.acos());
            let t = m2pi(a - (ca - cb).atan2(d - sa + sb) + p / 2.0);
            [t, p, m2pi(a - b - t + p)]
        })
    };
    let lrl = {
        let c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0;
        (c.abs() <= 1.0).then(|| {
            let p = m2pi(2.0 * PI - c.acos());
            let t = m2pi(-a - (ca - cb).atan2(d + sa - sb) + p / 2.0);
            [t, p, m2pi(b - a - t + p)]
        })
    };
    [lsl, rsr, lsr, rsl, rlr, lrl]
}

/// Segment kinds per word: +1 left, -1 right, 0 straight.
pub const WORD_TURNS: [[i8; 3]; 6] = [[1, 0, 1], [-1, 0, -1], [1, 0, -1], [-1, 0, 1], [-1, 1, -1], [1, -1, 1]];

/// Drives the three segments exactly (closed-form arcs) and returns the end pose.
pub fn dubins_endpoint(q0: Pose2D, word: usize, params: [f64; 3], r: f64) -> Pose2D {
    let (mut x, mut y, mut th) = (q0.x, q0.y, q0.theta);
    for (kind, len) in WORD_TURNS[word].iter().zip(params) {
        match kind {
            0 => {
                x += len * r * th.cos();
                y += len * r * th.sin();
            }
            k => {
                let s = *k as f64;
                let th1 = th + s * len;
                x += s * r * (th1.sin() - th.sin());
                y -= s * r * (th1.cos() - th.cos());
                th = th1;
            }
        }
    }
    Pose2D::new(x, y, th)
}

pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Minimum over words whose closed form actually reaches `q1`.
pub fn dubins_oracle_length(q0: Pose2D, q1: Pose2D, r: f64) -> f64 {
    let mut best = f64::INFINITY;
    for (w, params) in dubins_words(q0, q1, r).into_iter().enumerate() {
        let Some(p) = params else { continue };
        let end = dubins_endpoint(q0, w, p, r);
        let reach = (end.x - q1.x).hypot(end.y - q1.y) < 1e-7 && angle_diff(end.theta, q1.theta) < 1e-7;
        if reach {
            best = best.min(r * (p[0] + p[1] + p[2]));
        }
    }
    best
}

/// Dual certificate by accelerated projected gradient on
/// `max_{l >= 0} c'l - |A'l|^2 / 2` with `c = A p - b`, whose maximizer is
/// the projection multiplier; rescaling to `|A'l| = 1` gives the distance.
pub fn projected_gradient_dual(p: &Point, poly: &Polytope, iters: usize) -> f64 {
    let (rows, offs) = (poly.normals(), poly.offsets());
    let m = rows.len();
    let c: Vec<f64> = rows.iter().zip(offs).map(|(a, b)| a.dot(p) - b).collect();
    let at = |l: &[f64]| rows.iter().zip(l).fold(Point::zeros(), |acc, (a, li)| acc + a * *li);
    // Lipschitz constant of the gradient: largest eigenvalue of A A'.
    let gram = DMatrix::from_fn(m, m, |i, j| rows[i].dot(&rows[j]));
    let lip = gram.symmetric_eigenvalues().max();
    let (mut l, mut y, mut t) = (vec![0.0; m], vec![0.0; m], 1.0f64);
    for _ in 0..iters {
        let ay = at(&y);
        let next: Vec<f64> = (0..m).map(|i| (y[i] + (c[i] - rows[i].dot(&ay)) / lip).max(0.0)).collect();
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = (0..m).map(|i| next[i] + (t - 1.0) / t_next * (next[i] - l[i])).collect();
        l = next;
        t = t_next;
    }
    let n = at(&l).norm();
    if n == 0.0 {
        return 0.0;
    }
    c.iter().zip(&l).map(|(ci, li)| ci * li).sum::<f64>() / n
}

// ------------------------------------------------------------ circle fit

/// Algebraic (Kasa) least-squares circle fit; returns `(center, radius)`.
pub fn fit_circle(pts: &[Point]) -> (Point, f64) {
    let n = pts.len();
    let mut a = DMatrix::zeros(n, 3);
    let mut b = DVector::zeros(n);
    for (i, p) in pts.iter().enumerate() {
        a[(i, 0)] = p.x;
        a[(i, 1)] = p.y;
        a[(i, 2)] = 1.0;
        b[i] = p.x * p.x + p.y * p.y;
    }
    let sol = (a.transpose() * &a).lu().solve(&(a.transpose() * b)).unwrap();
    let c = Point::new(sol[0] / 2.0, sol[1] / 2.0);
    (c, (sol[2] + c.norm_squared()).sqrt())
}

// ---------------------------------------------------------------- solver

/// `min (1 - x)^2 + 100 (y - x^2)^2  s.t.  x^2 + y^2 <= 1`.
pub struct Rosenbrock;

impl NlpProblem for Rosenbrock {
    fn n_vars(&self) -> usize {
        2
    }
    fn n_ineq(&self) -> usize {
        1
    }
    fn objective(&self, z: &[f64]) -> f64 {
        (1.0 - z[0]).powi(2) + 100.0 * (z[1] - z[0] * z[0]).powi(2)
    }
    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        let w = z[1] - z[0] * z[0];
        DVector::from_vec(vec![-2.0 * (1.0 - z[0]) - 400.0 * z[0] * w, 200.0 * w])
    }
    fn residuals(&self, z: &[f64]) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let r = DVector::from_vec(vec![1.0 - z[0], 10.0 * (z[1] - z[0] * z[0])]);
        let j = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, -20.0 * z[0], 10.0]);
        Some((r, j))
    }
    fn ineq_constraints(&self, z: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        (
            DVector::from_vec(vec![1.0 - z[0] * z[0] - z[1] * z[1]]),
            DMatrix::from_row_slice(1, 2, &[-2.0 * z[0], -2.0 * z[1]]),
        )
    }
    fn add_constraint_curvature(&self, _z: &[f64], mult: &[f64], h: &mut DMatrix<f64>) {
        h[(0, 0)] += 2.0 * mult[0];
        h[(1, 1)] += 2.0 * mult[0];
    }
    fn initial_guess(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }
}

/// The unconstrained minimizer (1, 1) is infeasible, so the optimum lies on
/// the unit circle: a 1-D search over the angle, grid then golden section.
pub fn rosenbrock_oracle() -> Vector2<f64> {
    let f = |t: f64| {
        let (x, y) = (t.cos(), t.sin());
        (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
    };
    let n = 200_000;
    let best = (0..=n)
        .map(|i| 2.0 * PI * i as f64 / n as f64)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap();
    let h = 2.0 * PI / n as f64;
    let (mut lo, mut hi) = (best - h, best + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (m1, m2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let t = 0.5 * (lo + hi);
    Vector2::new(t.cos(), t.sin())
}

/// `min 1/2 z'Hz + g'z  s.t.  A z = b` with a random SPD `H`.
pub struct EqQp {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl EqQp {
    pub fn random(seed: u64, n: usize, m: usize) -> Self {
        let mut r = rng(seed);
        let mut u = || r.random_range(-1.0..1.0);
        let mr = DMatrix::from_fn(n, n, |_, _| u());
        let h = mr.transpose() * &mr + DMatrix::identity(n, n);
        let g = DVector::from_fn(n, |_, _| u());
        let a = DMatrix::from_fn(m, n, |_, _| u());
        let b = DVector::from_fn(m, |_, _| u());
        EqQp { h, g, a, b }
    }

    /// Solves `[H -A'; A 0] [z; y] = [-g; b]`.
    pub fn kkt_oracle(&self) -> (DVector<f64>, DVector<f64>) {
        let (n, m) = (self.h.nrows(), self.a.nrows());
        let mut k = DMatrix::zeros(n + m, n + m);
        k.view_mut((0, 0), (n, n)).copy_from(&self.h);
        k.view_mut((0, n), (n, m)).copy_from(&(-self.a.transpose()));
        k.view_mut((n, 0), (m, n)).copy_from(&self.a);
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(-&self.g));
        rhs.rows_mut(n, m).copy_from(&self.b);
        let sol = k.lu().solve(&rhs).expect("nonsingular KKT matrix");
        (sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned())
    }
}

impl NlpProblem for EqQp {
    fn n_vars(&self) -> usize {
        self.h.nrows()
    }
    fn n_eq(&self) -> usize {
        self.a.nrows()
    }
    fn objective(&self, z: &[f64]) -> f64 {
        let z = DVector::from_column_slice(z);
        0.5 * z.dot(&(&self.h * &z)) + self.g.dot(&z)
    }
    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        &self.h * DVector::from_column_slice(z) + &self.g
    }
    /// `f = |L'z + L^-1 g|^2 / 2 + const` with `H = L L'`, so the
    /// Gauss-Newton Hessian is exactly `H`.
    fn residuals(&self, z: &[f64]) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let l = self.h.clone().cholesky()?.l();
        let shift = l.solve_lower_triangular(&self.g)?;
        let j = l.transpose() / 2f64.sqrt();
        let r = &j * DVector::from_column_slice(z) + shift / 2f64.sqrt();
        Some((r, j))
    }
    fn eq_constraints(&self, z: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        (&self.a * DVector::from_column_slice(z) - &self.b, self.a.clone())
    }
    fn initial_guess(&self) -> Vec<f64> {
        vec![0.0; self.h.nrows()]
    }
}

/// `min |z - (1, -1)|^2  s.t.  z >= 0`.
pub struct Orthant;

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
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; 2], vec![f64::INFINITY; 2])
    }
    fn initial_guess(&self) -> Vec<f64> {
        vec![3.0, 3.0]
    }
}
