//! Planar primitives: poses, circles, convex polytopes and Dubins paths.

mod dubins;
mod polytope;

use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

pub use dubins::{dubins_sample, dubins_shortest, DubinsPath, DubinsWord, Segment};
pub use polytope::{circle_to_polytope, point_in_polytope, Polytope};

pub type Point = Vector2<f64>;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = theta.rem_euclid(two_pi);
    if r > PI {
        r -= two_pi;
    }
    r
}

/// Wraps an angle into `[0, 2pi)`.
pub(crate) fn mod_two_pi(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}

/// Position and heading in the plane. The heading is kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn distance_to(&self, other: &Pose2D) -> f64 {
        (self.position() - other.position()).norm()
    }
}

impl From<[f64; 3]> for Pose2D {
    fn from(v: [f64; 3]) -> Self {
        Pose2D::new(v[0], v[1], v[2])
    }
}

impl From<Pose2D> for [f64; 3] {
    fn from(p: Pose2D) -> Self {
        [p.x, p.y, p.theta]
    }
}

/// Disk obstacle `[cx, cy, r]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    pub fn new(cx: f64, cy: f64, radius: f64) -> Self {
        Self {
            center: Point::new(cx, cy),
            radius,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        (p - self.center).norm_squared() <= self.radius * self.radius
    }
}

impl From<[f64; 3]> for Circle {
    fn from(v: [f64; 3]) -> Self {
        Circle::new(v[0], v[1], v[2])
    }
}

impl From<Circle> for [f64; 3] {
    fn from(c: Circle) -> Self {
        [c.center.x, c.center.y, c.radius]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_keeps_half_open_interval() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(0.5 - 4.0 * PI) - 0.5).abs() < 1e-12);
        assert_eq!(normalize_angle(0.0), 0.0);
    }

    #[test]
    fn pose_serializes_as_triple() {
        let p = Pose2D::new(1.0, 2.0, 0.5);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[1.0,2.0,0.5]");
        let back: Pose2D = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
