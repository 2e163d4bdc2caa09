use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{run_episode, ControllerKind, EpisodeLog, Outcome, SimConfig};
use super::scenario::{generate_scenario, Layout, ScenarioConfig};
use crate::error::{Error, Result};
use crate::planner::{FallbackPlanner, ModelWeights, NeuralPlanner, Planner};

#[derive(Debug, Clone)]
pub enum PlannerChoice {
    Fallback,
    Neural(Arc<ModelWeights>),
}

impl PlannerChoice {
    pub fn name(&self) -> &'static str {
        match self {
            PlannerChoice::Fallback => "fallback",
            PlannerChoice::Neural(_) => "neural",
        }
    }

    pub fn instantiate(&self) -> Box<dyn Planner> {
        match self {
            PlannerChoice::Fallback => Box::new(FallbackPlanner),
            PlannerChoice::Neural(w) => Box::new(NeuralPlanner::new(w.clone())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub controller: ControllerKind,
    pub planner: PlannerChoice,
    pub sim: SimConfig,
}

/// Wall-clock fields; excluded when comparing reports for determinism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTiming {
    pub planner: Vec<f64>,
    pub controller: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: usize,
    /// Steps whose solve was not applied.
    pub solver_failures: usize,
    #[serde(with = "super::unbounded")]
    pub min_distance: f64,
    pub timing: EpisodeTiming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTiming {
    /// Means over the steps of successful episodes (s).
    pub mean_planner_step: f64,
    pub mean_controller_step: f64,
    /// Mean over successful episodes of the largest single-step time (s).
    pub mean_max_step: f64,
    /// Medians over every step of every episode (s).
    pub median_planner_step: f64,
    pub median_controller_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub controller: ControllerKind,
    pub planner: String,
    pub layout: Layout,
    pub base_seed: u64,
    pub n: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub episodes: Vec<EpisodeSummary>,
    pub timing: ReportTiming,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn summarize(log: &EpisodeLog) -> EpisodeSummary {
    EpisodeSummary {
        seed: log.seed,
        outcome: log.outcome,
        steps: log.steps.len(),
        solver_failures: log.failures(),
        min_distance: log.min_distance(),
        timing: EpisodeTiming {
            planner: log.steps.iter().map(|s| s.planner_time).collect(),
            controller: log.steps.iter().map(|s| s.controller_time).collect(),
        },
    }
}

pub fn build_report(cfg: &BenchConfig, layout: Layout, base_seed: u64, episodes: Vec<EpisodeSummary>) -> BenchmarkReport {
    let n = episodes.len();
    let successes = episodes.iter().filter(|e| e.outcome == Outcome::Success).count();
    let ok: Vec<&EpisodeSummary> = episodes.iter().filter(|e| e.outcome == Outcome::Success).collect();
    let planner_ok: Vec<f64> = ok.iter().flat_map(|e| e.timing.planner.iter().copied()).collect();
    let controller_ok: Vec<f64> = ok.iter().flat_map(|e| e.timing.controller.iter().copied()).collect();
    let max_steps: Vec<f64> = ok
        .iter()
        .map(|e| {
            e.timing
                .planner
                .iter()
                .zip(&e.timing.controller)
                .map(|(p, c)| p + c)
                .fold(0.0, f64::max)
        })
        .collect();
    let timing = ReportTiming {
        mean_planner_step: mean(&planner_ok),
        mean_controller_step: mean(&controller_ok),
        mean_max_step: mean(&max_steps),
        median_planner_step: median(episodes.iter().flat_map(|e| e.timing.planner.iter().copied()).collect()),
        median_controller_step: median(episodes.iter().flat_map(|e| e.timing.controller.iter().copied()).collect()),
    };
    BenchmarkReport {
        controller: cfg.controller,
        planner: cfg.planner.name().to_string(),
        layout,
        base_seed,
        n,
        successes,
        success_rate: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
        episodes,
        timing,
    }
}

/// Runs every config on scenarios `base_seed .. base_seed + n` using
/// `workers` threads. Reports come back in config order, episodes in seed order.
pub fn run_benchmark(
    n: usize,
    layout: Layout,
    configs: &[BenchConfig],
    base_seed: u64,
    scenarios: &ScenarioConfig,
    workers: usize,
) -> Result<Vec<BenchmarkReport>> {
    if n == 0 {
        return Err(Error::invalid("benchmark needs n >= 1"));
    }
    let scs = (0..n as u64)
        .map(|i| generate_scenario(base_seed.wrapping_add(i), layout, scenarios))
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    configs
        .iter()
        .map(|cfg| {
            let episodes = pool.install(|| {
                scs.par_iter()
                    .map(|sc| {
                        let mut planner = cfg.planner.instantiate();
                        run_episode(sc, planner.as_mut(), cfg.controller, &cfg.sim).map(|log| summarize(&log))
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            Ok(build_report(cfg, layout, base_seed, episodes))
        })
        .collect()
}

/// Report as JSON with every `timing` object removed, for reproducibility checks.
pub fn strip_timing(report_json: &serde_json::Value) -> serde_json::Value {
    match report_json {
        serde_json::Value::Object(m) => serde_json::Value::Object(
            m.iter()
                .filter(|(k, _)| k.as_str() != "timing")
                .map(|(k, v)| (k.clone(), strip_timing(v)))
                .collect(),
        ),
        serde_json::Value::Array(a) => serde_json::Value::Array(a.iter().map(strip_timing).collect()),
        other => other.clone(),
    }
}
