//! Run configuration: built-in defaults, then a TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::{ConstraintMode, ControllerConfig};
use crate::dynamics::BicycleParams;
use crate::error::{Error, Result};
use crate::planner::ReferenceConfig;
use crate::sim::{ControllerKind, EpisodeConfig, Layout, ScenarioConfig, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Neural,
    Fallback,
}

impl std::str::FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neural" => Ok(PlannerKind::Neural),
            "fallback" => Ok(PlannerKind::Fallback),
            _ => Err(Error::invalid(format!("unknown planner '{s}' (expected neural or fallback)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub seed: u64,
    pub layout: Layout,
    pub n: usize,
    /// `None` runs both controllers where that makes sense (`bench`).
    pub controller: Option<ControllerKind>,
    pub planner: PlannerKind,
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            layout: Layout::Square,
            n: 20,
            controller: None,
            planner: PlannerKind::Fallback,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub weights: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunOptions,
    pub controller: ControllerConfig,
    pub bicycle: BicycleParams,
    pub planner: ReferenceConfig,
    pub episode: EpisodeConfig,
    pub scenario: ScenarioConfig,
    pub paths: Paths,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub layout: Option<Layout>,
    pub n: Option<usize>,
    pub controller: Option<ControllerKind>,
    pub planner: Option<PlannerKind>,
    pub mode: Option<ConstraintMode>,
    pub workers: Option<usize>,
    pub weights: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl RunConfig {
    /// Parses TOML text. Errors name the dotted key at fault.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<file>", e.message().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let reason = e.inner().message().to_string();
            Error::config(if key == "." { "<root>".to_string() } else { key }, reason)
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Defaults, then the optional file, then `ov`; validated.
    pub fn resolve(file: Option<&Path>, ov: &Overrides) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(ov);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, ov: &Overrides) {
        let r = &mut self.run;
        r.seed = ov.seed.unwrap_or(r.seed);
        r.layout = ov.layout.unwrap_or(r.layout);
        r.n = ov.n.unwrap_or(r.n);
        r.controller = ov.controller.or(r.controller);
        r.planner = ov.planner.unwrap_or(r.planner);
        r.workers = ov.workers.unwrap_or(r.workers);
        if let Some(m) = ov.mode {
            self.controller.constraint_mode = m;
        }
        let p = &mut self.paths;
        for (dst, src) in [
            (&mut p.weights, &ov.weights),
            (&mut p.scenario, &ov.scenario),
            (&mut p.out, &ov.out),
            (&mut p.svg, &ov.svg),
        ] {
            if src.is_some() {
                *dst = src.clone();
            }
        }
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            controller: self.controller.clone(),
            bicycle: self.bicycle,
            planner: self.planner,
            episode: self.episode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.n == 0 {
            return Err(Error::config("run.n", "must be at least 1"));
        }
        if self.run.workers == 0 {
            return Err(Error::config("run.workers", "must be at least 1"));
        }
        if self.run.planner == PlannerKind::Neural && self.paths.weights.is_none() {
            return Err(Error::config("paths.weights", "the neural planner needs a weights file"));
        }
        self.scenario.validate()?;
        self.sim().validate()
    }
}
