//! Point-to-polytope distance in primal and dual form.
//!
//! The primal problem is the projection
//! `h = min ||y - p||^2  s.t.  A y <= b`, and the dual is
//! `g = max (A p - b)^T lambda  s.t.  ||A^T lambda||_2 <= 1, lambda >= 0`.
//! With unit-norm rows the dual optimum is the Euclidean distance itself, so
//! `g^2 == h` at the optimum. Both quantities are exposed; callers pick the
//! unit they need.

use crate::error::{Error, Result};
use crate::geometry::{Point, Polytope};

/// Feasibility slack used when classifying projection candidates.
const FEAS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    /// Squared distance (m^2).
    pub h: f64,
    /// Closest point of the polytope.
    pub y_star: Point,
    /// Dual optimum (m): the distance itself.
    pub g: f64,
    /// Dual certificate, one entry per facet.
    pub lambda_star: Vec<f64>,
}

/// Projects `p` onto the polytope by enumerating active sets of size at most two.
///
/// Returns `(h, y*, mu)` where `mu` are the KKT multipliers of
/// `min ||y - p||^2` (so `2 (y* - p) + A^T mu = 0`).
fn project(p: &Point, poly: &Polytope) -> Result<(f64, Point, Vec<f64>)> {
    let s = poly.facets();
    let a = poly.normals();
    let b = poly.offsets();
    let slack = poly.slack(p);
    if slack.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidObstacle("non-finite facet data".into()));
    }
    if slack.iter().all(|v| *v <= 0.0) {
        return Ok((0.0, *p, vec![0.0; s]));
    }
    let scale = 1.0 + p.amax();
    let feasible = |y: &Point| poly.slack(y).iter().all(|r| *r <= FEAS_TOL * scale);

    let mut best: Option<(f64, Point, Vec<f64>)> = None;
    let mut consider = |cand: (f64, Point, Vec<f64>)| {
        if best.as_ref().map_or(true, |b| cand.0 < b.0) {
            best = Some(cand);
        }
    };

    // single active facet
    for i in 0..s {
        if slack[i] <= 0.0 {
            continue;
        }
        let y = p - a[i] * slack[i];
        if feasible(&y) {
            let mut mu = vec![0.0; s];
            mu[i] = 2.0 * slack[i];
            consider(((y - p).norm_squared(), y, mu));
        }
    }
    // two active facets (vertex)
    for i in 0..s {
        for j in (i + 1)..s {
            let det = a[i].x * a[j].y - a[i].y * a[j].x;
            if det.abs() < 1e-14 {
                continue;
            }
            let y = Point::new(
                (b[i] * a[j].y - b[j] * a[i].y) / det,
                (a[i].x * b[j] - a[j].x * b[i]) / det,
            );
            if !feasible(&y) {
                continue;
            }
            // [a_i a_j] mu = 2 (p - y)
            let r = (p - y) * 2.0;
            let mi = (r.x * a[j].y - r.y * a[j].x) / det;
            let mj = (a[i].x * r.y - a[i].y * r.x) / det;
            if mi < -1e-12 || mj < -1e-12 {
                continue;
            }
            let mut mu = vec![0.0; s];
            mu[i] = mi.max(0.0);
            mu[j] = mj.max(0.0);
            consider(((y - p).norm_squared(), y, mu));
        }
    }
    best.ok_or_else(|| Error::InvalidObstacle("no feasible projection (empty or unbounded polytope)".into()))
}

/// Squared distance `h` and closest point `y*`.
pub fn primal_distance(p: &Point, poly: &Polytope) -> Result<(f64, Point)> {
    let (h, y, _) = project(p, poly)?;
    Ok((h, y))
}

/// Dual optimum `g` (a distance, in meters) and an optimal certificate `lambda*`.
///
/// The certificate is recovered from the projection multipliers by
/// normalizing `A^T mu` to unit length.
pub fn dual_distance(p: &Point, poly: &Polytope) -> Result<(f64, Vec<f64>)> {
    let (h, _, mu) = project(p, poly)?;
    if h == 0.0 {
        return Ok((0.0, vec![0.0; poly.facets()]));
    }
    let n = poly.transpose_mul(&mu).norm();
    let lambda: Vec<f64> = mu.iter().map(|m| m / n).collect();
    let g = dual_value(p, poly, &lambda);
    Ok((g, lambda))
}

/// Full primal/dual record at `p`.
pub fn distance(p: &Point, poly: &Polytope) -> Result<DistanceResult> {
    let (h, y_star, mu) = project(p, poly)?;
    let lambda_star = if h == 0.0 {
        vec![0.0; poly.facets()]
    } else {
        let n = poly.transpose_mul(&mu).norm();
        mu.iter().map(|m| m / n).collect()
    };
    let g = if h == 0.0 { 0.0 } else { dual_value(p, poly, &lambda_star) };
    Ok(DistanceResult {
        h,
        y_star,
        g,
        lambda_star,
    })
}

fn dual_value(p: &Point, poly: &Polytope, lambda: &[f64]) -> f64 {
    poly.slack(p).iter().zip(lambda).map(|(r, l)| r * l).sum()
}

/// Weak-duality lower bound `(A p - b)^T lambda <= dist(p, P)` for a dual-feasible `lambda`.
pub fn dual_lower_bound(p: &Point, poly: &Polytope, lambda: &[f64]) -> Result<f64> {
    if lambda.len() != poly.facets() {
        return Err(Error::invalid(format!(
            "lambda has {} entries, polytope has {} facets",
            lambda.len(),
            poly.facets()
        )));
    }
    if let Some(l) = lambda.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::invalid(format!("lambda entry {l} is negative")));
    }
    let n = poly.transpose_mul(lambda).norm();
    if n > 1.0 + 1e-9 {
        return Err(Error::invalid(format!("||A^T lambda|| = {n} exceeds 1")));
    }
    Ok(dual_value(p, poly, lambda))
}
