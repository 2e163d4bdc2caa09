use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{mod_two_pi, Pose2D};

/// Turn parameters below this are treated as zero.
const TURN_EPS: f64 = 1e-10;
const COINCIDENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DubinsWord {
    LSL,
    RSR,
    LSR,
    RSL,
    RLR,
    LRL,
}

impl DubinsWord {
    /// Tie-break order used by [`dubins_shortest`].
    pub const ALL: [DubinsWord; 6] = [
        DubinsWord::LSL,
        DubinsWord::RSR,
        DubinsWord::LSR,
        DubinsWord::RSL,
        DubinsWord::RLR,
        DubinsWord::LRL,
    ];

    pub fn segments(self) -> [Segment; 3] {
        use Segment::*;
        match self {
            DubinsWord::LSL => [Left, Straight, Left],
            DubinsWord::RSR => [Right, Straight, Right],
            DubinsWord::LSR => [Left, Straight, Right],
            DubinsWord::RSL => [Right, Straight, Left],
            DubinsWord::RLR => [Right, Left, Right],
            DubinsWord::LRL => [Left, Right, Left],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Left,
    Straight,
    Right,
}

/// Curvature-bounded forward path made of three segments.
///
/// `params` holds the turn angle in radians for arcs and the length in meters
/// for straight segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DubinsPath {
    pub word: DubinsWord,
    pub params: [f64; 3],
    pub r_min: f64,
    pub start: Pose2D,
}

impl DubinsPath {
    fn segment_length(&self, i: usize) -> f64 {
        match self.word.segments()[i] {
            Segment::Straight => self.params[i],
            _ => self.params[i] * self.r_min,
        }
    }

    pub fn length(&self) -> f64 {
        (0..3).map(|i| self.segment_length(i)).sum()
    }

    /// Pose at arc length `s`, clamped to `[0, length]`.
    pub fn sample(&self, s: f64) -> Pose2D {
        let mut remaining = s.max(0.0);
        let (mut x, mut y, mut th) = (self.start.x, self.start.y, self.start.theta);
        for (i, seg) in self.word.segments().into_iter().enumerate() {
            let seg_len = self.segment_length(i);
            let step = remaining.min(seg_len);
            (x, y, th) = advance(x, y, th, seg, step, self.r_min);
            remaining -= step;
            if remaining <= 0.0 {
                break;
            }
        }
        Pose2D::new(x, y, th)
    }

    pub fn end(&self) -> Pose2D {
        self.sample(self.length())
    }
}

fn advance(x: f64, y: f64, th: f64, seg: Segment, len: f64, r: f64) -> (f64, f64, f64) {
    match seg {
        Segment::Straight => (x + len * th.cos(), y + len * th.sin(), th),
        Segment::Left => {
            let phi = len / r;
            (
                x + r * ((th + phi).sin() - th.sin()),
                y - r * ((th + phi).cos() - th.cos()),
                th + phi,
            )
        }
        Segment::Right => {
            let phi = len / r;
            (
                x - r * ((th - phi).sin() - th.sin()),
                y + r * ((th - phi).cos() - th.cos()),
                th - phi,
            )
        }
    }
}

fn clamp_turn(t: f64) -> f64 {
    if !(TURN_EPS..=2.0 * PI - TURN_EPS).contains(&t) {
        0.0
    } else {
        t
    }
}

/// Normalized-frame quantities shared by the six word formulas.
struct Frame {
    alpha: f64,
    beta: f64,
    d: f64,
}

fn cross_tangent(ux: f64, uy: f64) -> Option<f64> {
    let p_sq = ux * ux + uy * uy - 4.0;
    if p_sq < -COINCIDENT_EPS {
        return None;
    }
    Some(p_sq.max(0.0).sqrt())
}

/// Candidate `(t, p, q)` in normalized units (turns in radians, straight in units of `r_min`).
fn word_params(word: DubinsWord, f: &Frame) -> Option<[f64; 3]> {
    let (a, b, d) = (f.alpha, f.beta, f.d);
    let (sa, sb, ca, cb) = (a.sin(), b.sin(), a.cos(), b.cos());
    let c_ab = (a - b).cos();
    match word {
        // Same-side words: p is the distance between the two turning circles,
        // taken directly rather than expanded to avoid cancellation. When the
        // circles coincide the tangent direction is undefined and the path is
        // a single arc, so the whole turn goes into the last segment.
        DubinsWord::LSL => {
            let (ux, uy) = (d + sa - sb, cb - ca);
            let p = ux.hypot(uy);
            let tmp = if p < COINCIDENT_EPS { a } else { uy.atan2(ux) };
            Some([mod_two_pi(tmp - a), p, mod_two_pi(b - tmp)])
        }
        DubinsWord::RSR => {
            let (ux, uy) = (d - sa + sb, ca - cb);
            let p = ux.hypot(uy);
            let tmp = if p < COINCIDENT_EPS { a } else { uy.atan2(ux) };
            Some([mod_two_pi(a - tmp), p, mod_two_pi(tmp - b)])
        }
        // Cross words need the circles at least 2 apart; a zero-length
        // straight sits exactly on that boundary, so allow rounding there.
        DubinsWord::LSR => {
            let (ux, uy) = (d + sa + sb, -ca - cb);
            let p = cross_tangent(ux, uy)?;
            let tmp = uy.atan2(ux) - (-2.0f64).atan2(p);
            Some([mod_two_pi(tmp - a), p, mod_two_pi(tmp - b)])
        }
        DubinsWord::RSL => {
            let (ux, uy) = (d - sa - sb, ca + cb);
            let p = cross_tangent(ux, uy)?;
            let tmp = uy.atan2(ux) - 2.0f64.atan2(p);
            Some([mod_two_pi(a - tmp), p, mod_two_pi(b - tmp)])
        }
        DubinsWord::RLR => {
            let tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sa - sb)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let p = mod_two_pi(2.0 * PI - tmp.acos());
            let t = mod_two_pi(a - (ca - cb).atan2(d - sa + sb) + p / 2.0);
            Some([t, p, mod_two_pi(a - b - t + p)])
        }
        DubinsWord::LRL => {
            let tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sb - sa)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let p = mod_two_pi(2.0 * PI - tmp.acos());
            let t = mod_two_pi(-a - (ca - cb).atan2(d + sa - sb) + p / 2.0);
            Some([t, p, mod_two_pi(b - a - t + p)])
        }
    }
}

fn frame(q0: &Pose2D, q1: &Pose2D, r_min: f64) -> Frame {
    let dx = q1.x - q0.x;
    let dy = q1.y - q0.y;
    let d = dx.hypot(dy) / r_min;
    let th = if d > 0.0 { mod_two_pi(dy.atan2(dx)) } else { 0.0 };
    Frame {
        alpha: mod_two_pi(q0.theta - th),
        beta: mod_two_pi(q1.theta - th),
        d,
    }
}

impl DubinsPath {
    /// Path of a specific word, if that word connects the two poses.
    pub fn with_word(q0: Pose2D, q1: Pose2D, r_min: f64, word: DubinsWord) -> Option<DubinsPath> {
        let f = frame(&q0, &q1, r_min);
        let raw = word_params(word, &f)?;
        let segs = word.segments();
        let mut params = [0.0; 3];
        for i in 0..3 {
            params[i] = match segs[i] {
                Segment::Straight => raw[i] * r_min,
                _ => clamp_turn(raw[i]),
            };
        }
        Some(DubinsPath {
            word,
            params,
            r_min,
            start: q0,
        })
    }
}

/// Shortest Dubins path from `q0` to `q1`.
///
/// Ties (within 1e-12 m) are broken by the order of [`DubinsWord::ALL`].
pub fn dubins_shortest(q0: Pose2D, q1: Pose2D, r_min: f64) -> DubinsPath {
    assert!(r_min > 0.0, "r_min must be positive");
    let mut best: Option<DubinsPath> = None;
    for word in DubinsWord::ALL {
        if let Some(path) = DubinsPath::with_word(q0, q1, r_min, word) {
            let better = match &best {
                None => true,
                Some(b) => path.length() < b.length() - 1e-12,
            };
            if better {
                best = Some(path);
            }
        }
    }
    // LSL and RSR cannot both be infeasible.
    best.expect("some Dubins word is always feasible")
}

/// Samples the path every `ds` meters of arc length, always including both ends.
pub fn dubins_sample(path: &DubinsPath, ds: f64) -> Vec<Pose2D> {
    assert!(ds > 0.0, "ds must be positive");
    let len = path.length();
    let n = (len / ds + 1e-9).floor() as usize;
    let mut out: Vec<Pose2D> = (0..=n).map(|i| path.sample(i as f64 * ds)).collect();
    if (n as f64) * ds < len - 1e-9 {
        out.push(path.end());
    }
    out
}
