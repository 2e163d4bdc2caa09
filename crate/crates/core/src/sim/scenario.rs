use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Circle, Point, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Square,
    Line,
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Layout::Square),
            "line" => Ok(Layout::Line),
            _ => Err(Error::invalid(format!("unknown layout '{s}' (expected square or line)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub layout: Layout,
    pub start: Pose2D,
    pub goal: Pose2D,
    pub obstacles: Vec<Circle>,
}

/// Sampling ranges for [`generate_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub workspace: f64,
    pub start_region: [f64; 2],
    pub goal_region: [f64; 2],
    pub count_range: [usize; 2],
    pub radius_range: [f64; 2],
    /// Half-width of the diagonal corridor (m).
    pub corridor_half_width: f64,
    /// Clearance between any disk and the start or goal (m).
    pub endpoint_margin: f64,
    pub line_band: [f64; 2],
    pub max_rejections: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            workspace: 50.0,
            start_region: [2.0, 10.0],
            goal_region: [40.0, 48.0],
            count_range: [4, 6],
            radius_range: [1.0, 4.0],
            corridor_half_width: 5.0,
            endpoint_margin: 1.0,
            line_band: [18.0, 32.0],
            max_rejections: 1000,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let key = |k: &str| format!("scenario.{k}");
        let ordered = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !(self.workspace > 0.0 && self.workspace.is_finite()) {
            return Err(Error::config(key("workspace"), "must be finite and > 0"));
        }
        for (name, r) in [
            ("start_region", self.start_region),
            ("goal_region", self.goal_region),
            ("line_band", self.line_band),
        ] {
            if !ordered(r) || r[0] < 0.0 || r[1] > self.workspace {
                return Err(Error::config(key(name), "must be an ordered range inside the workspace"));
            }
        }
        if !ordered(self.radius_range) || self.radius_range[0] <= 0.0 {
            return Err(Error::config(key("radius_range"), "must be an ordered range of positive radii"));
        }
        if self.count_range[0] > self.count_range[1] {
            return Err(Error::config(key("count_range"), "must be ordered"));
        }
        if !(self.corridor_half_width >= 0.0) {
            return Err(Error::config(key("corridor_half_width"), "must be >= 0"));
        }
        if !(self.endpoint_margin >= 0.0) {
            return Err(Error::config(key("endpoint_margin"), "must be >= 0"));
        }
        if self.max_rejections == 0 {
            return Err(Error::config(key("max_rejections"), "must be >= 1"));
        }
        Ok(())
    }
}

fn angle(rng: &mut ChaCha8Rng) -> f64 {
    // (-pi, pi]
    -rng.random_range(-PI..PI)
}

/// Deterministic scenario from `seed` (ChaCha8 stream seeded with `seed`).
pub fn generate_scenario(seed: u64, layout: Layout, cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = cfg.workspace;
    let (start, goal) = match layout {
        Layout::Square => {
            let [s0, s1] = cfg.start_region;
            let [g0, g1] = cfg.goal_region;
            let start = Pose2D::new(rng.random_range(s0..=s1), rng.random_range(s0..=s1), angle(&mut rng));
            let goal = Pose2D::new(rng.random_range(g0..=g1), rng.random_range(g0..=g1), angle(&mut rng));
            (start, goal)
        }
        Layout::Line => (Pose2D::new(0.1 * w, 0.5 * w, 0.0), Pose2D::new(0.9 * w, 0.5 * w, 0.0)),
    };
    let count = rng.random_range(cfg.count_range[0]..=cfg.count_range[1]);
    let mut obstacles = Vec::with_capacity(count);
    let clear = |c: &Circle| {
        [start, goal]
            .iter()
            .all(|q| (q.position() - c.center).norm() >= c.radius + cfg.endpoint_margin)
    };
    for i in 0..count {
        let mut rejections = 0;
        loop {
            let r = rng.random_range(cfg.radius_range[0]..=cfg.radius_range[1]);
            let center = match layout {
                Layout::Square if i < count / 2 => Some(Point::new(rng.random_range(r..=w - r), rng.random_range(r..=w - r))),
                Layout::Square => {
                    let t = rng.random_range(0.0..=w);
                    let off = rng.random_range(-cfg.corridor_half_width..=cfg.corridor_half_width);
                    let c = Point::new(t - off / 2f64.sqrt(), t + off / 2f64.sqrt());
                    let inside = c.iter().all(|v| *v >= r && *v <= w - r);
                    inside.then_some(c)
                }
                Layout::Line => {
                    let [b0, b1] = cfg.line_band;
                    (b1 - b0 >= 2.0 * r).then(|| Point::new(rng.random_range(r..=w - r), rng.random_range(b0 + r..=b1 - r)))
                }
            };
            if let Some(center) = center {
                let c = Circle { center, radius: r };
                if clear(&c) {
                    obstacles.push(c);
                    break;
                }
            }
            rejections += 1;
            if rejections >= cfg.max_rejections {
                return Err(Error::Generation(format!(
                    "obstacle {i} rejected {rejections} times in a row for seed {seed}"
                )));
            }
        }
    }
    Ok(Scenario {
        seed,
        layout,
        start,
        goal,
        obstacles,
    })
}
