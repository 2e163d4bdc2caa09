use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::episode::{check_collision, run_episode, scenario_polytopes, ControllerKind, EpisodeLog, Outcome, SimConfig};
use super::scenario::{generate_scenario, Layout, Scenario, ScenarioConfig};
use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::geometry::{Circle, Pose2D};
use crate::planner::FallbackPlanner;

/// Shortest expert trajectory worth keeping.
pub const MIN_TRAJECTORY_POSES: usize = 40;

/// One line of the exported dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub seed: u64,
    pub layout: Layout,
    pub start: Pose2D,
    pub goal: Pose2D,
    pub obstacles: Vec<Circle>,
    pub trajectory: Vec<Pose2D>,
}

/// Poses visited by an episode, start included.
pub fn trajectory_poses(log: &EpisodeLog) -> Vec<Pose2D> {
    let mut out: Vec<Pose2D> = log.steps.iter().map(|s| s.state.pose()).collect();
    if let Some(last) = log.steps.last() {
        out.push(last.next_state.pose());
    }
    out
}

/// Independent re-check of a record: length threshold and no pose touching an obstacle.
pub fn audit_record(rec: &DatasetRecord, n_facets: usize) -> Result<bool> {
    if rec.trajectory.len() < MIN_TRAJECTORY_POSES {
        return Ok(false);
    }
    let sc = Scenario {
        seed: rec.seed,
        layout: rec.layout,
        start: rec.start,
        goal: rec.goal,
        obstacles: rec.obstacles.clone(),
    };
    let polys = scenario_polytopes(&sc, n_facets)?;
    Ok(rec
        .trajectory
        .iter()
        .all(|p| !check_collision(&State::from_pose(p, 0.0), &polys)))
}

/// Expert record for a scenario, or `None` when the episode is not kept.
pub fn expert_record(sc: &Scenario, cfg: &SimConfig) -> Result<Option<DatasetRecord>> {
    let log = run_episode(sc, &mut FallbackPlanner, ControllerKind::Mdd1, cfg)?;
    if log.outcome != Outcome::Success {
        return Ok(None);
    }
    let rec = DatasetRecord {
        seed: sc.seed,
        layout: sc.layout,
        start: sc.start,
        goal: sc.goal,
        obstacles: sc.obstacles.clone(),
        trajectory: trajectory_poses(&log),
    };
    Ok(audit_record(&rec, cfg.episode.n_facets)?.then_some(rec))
}

/// Runs the expert on seeds `base_seed .. base_seed + n` and writes the kept
/// episodes as JSON lines. Returns the number of records written.
pub fn export_dataset(
    n: usize,
    base_seed: u64,
    layout: Layout,
    out_path: &Path,
    scenarios: &ScenarioConfig,
    cfg: &SimConfig,
) -> Result<usize> {
    let file = File::create(out_path).map_err(|e| Error::io(out_path, e))?;
    let mut w = BufWriter::new(file);
    let mut written = 0;
    for i in 0..n as u64 {
        let sc = generate_scenario(base_seed.wrapping_add(i), layout, scenarios)?;
        if let Some(rec) = expert_record(&sc, cfg)? {
            let line = serde_json::to_string(&rec).map_err(|e| Error::Json {
                context: format!("record for seed {}", rec.seed),
                source: e,
            })?;
            writeln!(w, "{line}").map_err(|e| Error::io(out_path, e))?;
            written += 1;
        }
    }
    w.flush().map_err(|e| Error::io(out_path, e))?;
    Ok(written)
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Json {
            context: format!("{}:{}", path.display(), i + 1),
            source: e,
        })?);
    }
    Ok(out)
}
