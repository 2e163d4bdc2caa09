//! Discrete-time kinematic bicycle (explicit Euler).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Point, Pose2D};

/// Rear-axle state `[x, y, v, theta]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub theta: f64,
}

impl State {
    pub fn new(x: f64, y: f64, v: f64, theta: f64) -> Self {
        Self { x, y, v, theta }
    }

    pub fn from_pose(p: &Pose2D, v: f64) -> Self {
        Self::new(p.x, p.y, v, p.theta)
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn pose(&self) -> Pose2D {
        Pose2D::new(self.x, self.y, self.theta)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.v, self.theta]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Input `[a, delta]`: acceleration and front-wheel steering angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub a: f64,
    pub delta: f64,
}

impl Control {
    pub fn new(a: f64, delta: f64) -> Self {
        Self { a, delta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BicycleParams {
    pub wheelbase: f64,
    pub dt: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub delta_max: f64,
}

impl Default for BicycleParams {
    fn default() -> Self {
        Self {
            wheelbase: 2.0,
            dt: 0.1,
            v_min: 0.0,
            v_max: 4.0,
            a_max: 2.0,
            delta_max: 0.5,
        }
    }
}

impl BicycleParams {
    pub fn validate(&self) -> Result<()> {
        let p = self;
        if !(p.wheelbase > 0.0) {
            return Err(Error::config("bicycle.wheelbase", "must be > 0"));
        }
        if !(p.dt > 0.0) {
            return Err(Error::config("bicycle.dt", "must be > 0"));
        }
        if !(p.v_min <= p.v_max && (p.v_min <= 0.0 && 0.0 <= p.v_max)) || p.v_min == p.v_max {
            return Err(Error::config(
                "bicycle.v_min",
                "need v_min <= 0 <= v_max with v_min < v_max",
            ));
        }
        if !(p.a_max > 0.0) {
            return Err(Error::config("bicycle.a_max", "must be > 0"));
        }
        if !(p.delta_max > 0.0 && p.delta_max < std::f64::consts::FRAC_PI_2) {
            return Err(Error::config("bicycle.delta_max", "must be in (0, pi/2)"));
        }
        Ok(())
    }

    /// Minimum turning radius `L / tan(delta_max)`.
    pub fn min_turning_radius(&self) -> f64 {
        self.wheelbase / self.delta_max.tan()
    }
}

/// One Euler step without heading wrap or velocity clamp; used inside the predictor.
pub fn bicycle_step_raw(s: &State, u: &Control, p: &BicycleParams) -> State {
    State {
        x: s.x + s.v * s.theta.cos() * p.dt,
        y: s.y + s.v * s.theta.sin() * p.dt,
        v: s.v + u.a * p.dt,
        theta: s.theta + s.v * u.delta.tan() / p.wheelbase * p.dt,
    }
}

/// One simulator step: Euler update, heading wrapped to `(-pi, pi]`, velocity clamped.
pub fn bicycle_step(s: &State, u: &Control, p: &BicycleParams) -> State {
    let mut next = bicycle_step_raw(s, u, p);
    next.theta = normalize_angle(next.theta);
    next.v = next.v.clamp(p.v_min, p.v_max);
    next
}

/// States `s0, f(s0, u0), ...`; length `controls.len() + 1`.
pub fn rollout(s0: &State, controls: &[Control], p: &BicycleParams) -> Vec<State> {
    let mut out = Vec::with_capacity(controls.len() + 1);
    out.push(*s0);
    for u in controls {
        let next = bicycle_step(out.last().unwrap(), u, p);
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn at_rest_stays_put() {
        let s = State::new(1.0, 2.0, 0.0, 0.3);
        let n = bicycle_step(&s, &Control::new(0.0, 0.4), &BicycleParams::default());
        assert_eq!(n, s);
    }

    #[test]
    fn straight_unit_speed() {
        let s = State::new(0.0, 0.0, 1.0, 0.0);
        let n = bicycle_step(&s, &Control::default(), &BicycleParams::default());
        assert!((n.x - 0.1).abs() < 1e-15);
        assert_eq!((n.y, n.v, n.theta), (0.0, 1.0, 0.0));
    }

    #[test]
    fn rollout_shapes() {
        let p = BicycleParams::default();
        let s0 = State::new(0.0, 0.0, 0.0, 0.0);
        let traj = rollout(&s0, &[Control::default(); 5], &p);
        assert_eq!(traj.len(), 6);
        assert!(traj.iter().all(|s| *s == s0));
        let u = Control::new(1.0, 0.2);
        let one = rollout(&State::new(0.0, 0.0, 1.0, 0.0), &[u], &p);
        assert_eq!(one[1], bicycle_step(&one[0], &u, &p));
    }

    #[test]
    fn minimum_turning_radius_default() {
        let r = BicycleParams::default().min_turning_radius();
        assert!((r - 2.0 / 0.5f64.tan()).abs() < 1e-15);
        assert!((r - 3.6604).abs() < 1e-3);
    }

    fn control_strategy() -> impl Strategy<Value = Vec<Control>> {
        prop::collection::vec((-2.0..2.0f64, -0.5..0.5f64), 1..40)
            .prop_map(|v| v.into_iter().map(|(a, d)| Control::new(a, d)).collect())
    }

    proptest! {
        #[test]
        fn rollout_matches_stepwise(controls in control_strategy(), v0 in 0.0..4.0f64, th in -3.0..3.0f64) {
            let p = BicycleParams::default();
            let s0 = State::new(1.0, -2.0, v0, th);
            let traj = rollout(&s0, &controls, &p);
            let mut s = s0;
            prop_assert_eq!(traj[0], s0);
            for (k, u) in controls.iter().enumerate() {
                s = bicycle_step(&s, u, &p);
                prop_assert_eq!(traj[k + 1], s);
            }
        }

        #[test]
        fn displacement_and_clamp(v0 in 0.0..4.0f64, a in -2.0..2.0f64, d in -0.5..0.5f64, th in -3.0..3.0f64) {
            let p = BicycleParams::default();
            let s = State::new(0.0, 0.0, v0, th);
            let n = bicycle_step(&s, &Control::new(a, d), &p);
            let disp = (n.position() - s.position()).norm();
            prop_assert!((disp - v0.abs() * p.dt).abs() < 1e-12);
            prop_assert!(n.v >= p.v_min && n.v <= p.v_max);
            prop_assert!(n.theta > -std::f64::consts::PI && n.theta <= std::f64::consts::PI);
        }
    }
}
