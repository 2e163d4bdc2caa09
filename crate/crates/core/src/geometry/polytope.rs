use std::f64::consts::PI;

use super::{Circle, Point};
use crate::error::{Error, Result};

/// Bounded convex polygon `{ y : A y <= b }` with unit-norm rows of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    normals: Vec<Point>,
    offsets: Vec<f64>,
    source: Option<Circle>,
}

impl Polytope {
    /// Builds a polytope from half-planes `a_i . y <= b_i`. Rows are rescaled to unit norm.
    pub fn new(rows: Vec<Point>, offsets: Vec<f64>) -> Result<Self> {
        if rows.len() != offsets.len() {
            return Err(Error::InvalidObstacle(format!(
                "{} rows but {} offsets",
                rows.len(),
                offsets.len()
            )));
        }
        if rows.len() < 3 {
            return Err(Error::InvalidObstacle(format!(
                "need at least 3 facets, got {}",
                rows.len()
            )));
        }
        let mut normals = Vec::with_capacity(rows.len());
        let mut b = Vec::with_capacity(rows.len());
        for (row, off) in rows.into_iter().zip(offsets) {
            let n = row.norm();
            if !(n.is_finite() && n > 0.0 && off.is_finite()) {
                return Err(Error::InvalidObstacle("degenerate facet row".into()));
            }
            normals.push(row / n);
            b.push(off / n);
        }
        let poly = Polytope {
            normals,
            offsets: b,
            source: None,
        };
        if !poly.is_bounded() {
            return Err(Error::InvalidObstacle("polytope is unbounded".into()));
        }
        if poly.vertices().is_empty() {
            return Err(Error::InvalidObstacle("polytope is empty".into()));
        }
        Ok(poly)
    }

    pub fn facets(&self) -> usize {
        self.normals.len()
    }

    pub fn normals(&self) -> &[Point] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn source(&self) -> Option<&Circle> {
        self.source.as_ref()
    }

    /// `A p - b`.
    pub fn slack(&self, p: &Point) -> Vec<f64> {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| a.dot(p) - b)
            .collect()
    }

    /// `A^T lambda`.
    pub fn transpose_mul(&self, lambda: &[f64]) -> Point {
        self.normals
            .iter()
            .zip(lambda)
            .fold(Point::zeros(), |acc, (a, l)| acc + a * *l)
    }

    /// The normals positively span the plane iff no angular gap reaches pi.
    fn is_bounded(&self) -> bool {
        let mut angles: Vec<f64> = self.normals.iter().map(|n| n.y.atan2(n.x)).collect();
        angles.sort_by(|a, b| a.total_cmp(b));
        let mut max_gap = angles[0] + 2.0 * PI - angles[angles.len() - 1];
        for w in angles.windows(2) {
            max_gap = max_gap.max(w[1] - w[0]);
        }
        max_gap < PI - 1e-12
    }

    /// Feasible pairwise facet intersections, in counter-clockwise order.
    pub fn vertices(&self) -> Vec<Point> {
        let s = self.facets();
        let mut verts: Vec<Point> = Vec::new();
        for i in 0..s {
            for j in (i + 1)..s {
                let (ai, aj) = (self.normals[i], self.normals[j]);
                let det = ai.x * aj.y - ai.y * aj.x;
                if det.abs() < 1e-12 {
                    continue;
                }
                let (bi, bj) = (self.offsets[i], self.offsets[j]);
                let v = Point::new((bi * aj.y - bj * ai.y) / det, (ai.x * bj - aj.x * bi) / det);
                let tol = 1e-9 * (1.0 + v.amax());
                if self.slack(&v).iter().all(|r| *r <= tol)
                    && !verts.iter().any(|w| (w - v).norm() < 1e-9)
                {
                    verts.push(v);
                }
            }
        }
        if verts.is_empty() {
            return verts;
        }
        let c = verts.iter().sum::<Point>() / verts.len() as f64;
        verts.sort_by(|p, q| {
            let ap = (p.y - c.y).atan2(p.x - c.x);
            let aq = (q.y - c.y).atan2(q.x - c.x);
            ap.total_cmp(&aq)
        });
        verts
    }
}

/// Circumscribed regular `n_facets`-gon around a disk.
pub fn circle_to_polytope(c: &Circle, n_facets: usize) -> Result<Polytope> {
    if n_facets < 3 {
        return Err(Error::invalid(format!("n_facets must be >= 3, got {n_facets}")));
    }
    if !(c.radius > 0.0 && c.radius.is_finite()) {
        return Err(Error::InvalidObstacle(format!("radius {} is not positive", c.radius)));
    }
    let mut normals = Vec::with_capacity(n_facets);
    let mut offsets = Vec::with_capacity(n_facets);
    for i in 0..n_facets {
        let phi = 2.0 * PI * i as f64 / n_facets as f64;
        let a = Point::new(phi.cos(), phi.sin());
        offsets.push(c.radius + a.dot(&c.center));
        normals.push(a);
    }
    let mut poly = Polytope::new(normals, offsets)?;
    poly.source = Some(*c);
    Ok(poly)
}

/// Closed membership test `A p <= b` with zero tolerance.
pub fn point_in_polytope(p: &Point, poly: &Polytope) -> bool {
    poly.normals
        .iter()
        .zip(&poly.offsets)
        .all(|(a, b)| a.dot(p) <= *b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_square() -> Polytope {
        circle_to_polytope(&Circle::new(0.0, 0.0, 1.0), 4).unwrap()
    }

    #[test]
    fn four_facets_give_axis_aligned_square() {
        let sq = unit_square();
        let expected = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (n, (ex, ey)) in sq.normals().iter().zip(expected) {
            assert!((n.x - ex).abs() < 1e-15 && (n.y - ey).abs() < 1e-15);
        }
        for b in sq.offsets() {
            assert!((b - 1.0).abs() < 1e-15);
        }
        assert_eq!(sq.vertices().len(), 4);
    }

    #[test]
    fn membership() {
        let sq = unit_square();
        assert!(point_in_polytope(&Point::new(0.0, 0.0), &sq));
        assert!(!point_in_polytope(&Point::new(2.0, 0.0), &sq));
        assert!(point_in_polytope(&Point::new(1.0, 0.0), &sq));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(circle_to_polytope(&Circle::new(0.0, 0.0, 1.0), 2).is_err());
        // half-plane strip: unbounded
        let strip = Polytope::new(
            vec![Point::new(0.0, 1.0), Point::new(0.0, -1.0), Point::new(0.0, 1.0)],
            vec![1.0, 1.0, 2.0],
        );
        assert!(strip.is_err());
        // x <= -1 and x >= 1: empty
        let empty = Polytope::new(
            vec![Point::new(1.0, 0.0), Point::new(-1.0, 0.0), Point::new(0.0, 1.0), Point::new(0.0, -1.0)],
            vec![-1.0, -1.0, 1.0, 1.0],
        );
        assert!(empty.is_err());
    }

    #[test]
    fn rows_are_normalized_at_construction() {
        let p = Polytope::new(
            vec![Point::new(2.0, 0.0), Point::new(0.0, 3.0), Point::new(-1.0, -1.0)],
            vec![2.0, 3.0, 1.0],
        )
        .unwrap();
        for n in p.normals() {
            assert!((n.norm() - 1.0).abs() < 1e-15);
        }
        assert!((p.offsets()[0] - 1.0).abs() < 1e-15);
        assert!((p.offsets()[2] - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn octagon_margin_matches_dense_boundary_sampling() {
        let c = Circle::new(3.0, 0.0, 2.0);
        let poly = circle_to_polytope(&c, 8).unwrap();
        // every disk boundary point is inside
        for k in 0..10_000 {
            let phi = 2.0 * PI * k as f64 / 10_000.0;
            let p = c.center + Point::new(phi.cos(), phi.sin()) * c.radius;
            assert!(poly.slack(&p).iter().all(|r| *r <= 1e-12));
        }
        // max over-approximation margin: farthest polygon boundary point from the disk
        let verts = poly.vertices();
        let mut worst: f64 = 0.0;
        for i in 0..verts.len() {
            let (p, q) = (verts[i], verts[(i + 1) % verts.len()]);
            for k in 0..=1000 {
                let t = k as f64 / 1000.0;
                let pt = p + (q - p) * t;
                worst = worst.max((pt - c.center).norm() - c.radius);
            }
        }
        let expected = 2.0 * (1.0 / (PI / 8.0).cos() - 1.0);
        assert!((worst - expected).abs() < 1e-9, "{worst} vs {expected}");
    }

    proptest! {
        #[test]
        fn disk_points_always_contained(
            cx in -50.0..50.0f64, cy in -50.0..50.0f64, r in 0.1..5.0f64,
            n in 3usize..16, rho in 0.0..1.0f64, phi in 0.0..(2.0 * PI)
        ) {
            let c = Circle::new(cx, cy, r);
            let poly = circle_to_polytope(&c, n).unwrap();
            for a in poly.normals() {
                prop_assert!((a.norm() - 1.0).abs() < 1e-12);
            }
            let p = c.center + Point::new(phi.cos(), phi.sin()) * (r * rho.sqrt());
            prop_assert!(poly.slack(&p).iter().all(|v| *v <= 1e-9));
        }

        #[test]
        fn membership_agrees_with_direct_inequalities(
            cx in -5.0..5.0f64, cy in -5.0..5.0f64, r in 0.5..3.0f64, n in 3usize..9,
            px in -10.0..10.0f64, py in -10.0..10.0f64
        ) {
            let poly = circle_to_polytope(&Circle::new(cx, cy, r), n).unwrap();
            let p = Point::new(px, py);
            let direct = poly.normals().iter().zip(poly.offsets())
                .all(|(a, b)| a.x * px + a.y * py <= *b);
            prop_assert_eq!(point_in_polytope(&p, &poly), direct);
        }
    }
}
