use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use safenav::config::{Overrides, PlannerKind, RunConfig};
use safenav::controller::ConstraintMode;
use safenav::planner::{load_weights, tensor_table, FallbackPlanner, ModelWeights, NeuralPlanner, Planner};
use safenav::sim::{
    export_dataset, generate_scenario, run_benchmark, write_episode_csv, write_svg, BenchConfig, BenchmarkReport,
    ControllerKind, EpisodeLog, Layout, PlannerChoice, Scenario,
};
use safenav::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "safenav", version, about = "Dual-distance safe navigation: scenarios, episodes, benchmarks")]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// square | line
    #[arg(long, global = true)]
    layout: Option<Layout>,
    /// Number of scenarios.
    #[arg(short = 'n', global = true)]
    n: Option<usize>,
    /// mdd1 | dcbf
    #[arg(long, global = true)]
    controller: Option<ControllerKind>,
    /// neural | fallback
    #[arg(long, global = true)]
    planner: Option<PlannerKind>,
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    /// paper | consistent
    #[arg(long, global = true)]
    mode: Option<ConstraintMode>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    svg: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Scenario file to run instead of a generated one.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scenario files.
    #[command(subcommand)]
    Scenario(ScenarioCmd),
    /// Single closed-loop episodes.
    #[command(subcommand)]
    Episode(EpisodeCmd),
    /// Success rate and timing over seeded scenarios.
    Bench,
    /// Expert trajectories for training.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Draw a saved episode.
    Render {
        /// Episode file written by `episode run`.
        episode: PathBuf,
    },
    /// Planner weight files.
    #[command(subcommand)]
    Weights(WeightsCmd),
}

#[derive(Subcommand, Debug)]
enum ScenarioCmd {
    Gen,
}

#[derive(Subcommand, Debug)]
enum EpisodeCmd {
    Run,
}

#[derive(Subcommand, Debug)]
enum DatasetCmd {
    Gen,
}

#[derive(Subcommand, Debug)]
enum WeightsCmd {
    Check { path: PathBuf },
}

/// What `episode run` saves for `render`.
#[derive(Serialize, Deserialize)]
struct EpisodeFile {
    scenario: Scenario,
    log: EpisodeLog,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            layout: self.layout,
            n: self.n,
            controller: self.controller,
            planner: self.planner,
            mode: self.mode,
            workers: self.workers,
            weights: self.weights.clone(),
            scenario: self.scenario.clone(),
            out: self.out.clone(),
            svg: self.svg.clone(),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, data).map_err(|e| Error::io(path, e))
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        context: "serializing output".into(),
        source: e,
    })
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read(path)?).map_err(|e| Error::Json {
        context: path.display().to_string(),
        source: e,
    })
}

fn weights(cfg: &RunConfig) -> Result<Arc<ModelWeights>> {
    let path = cfg
        .paths
        .weights
        .as_deref()
        .ok_or_else(|| Error::config("paths.weights", "the neural planner needs a weights file"))?;
    Ok(Arc::new(load_weights(&read(path)?)?))
}

fn planner_choice(cfg: &RunConfig) -> Result<PlannerChoice> {
    Ok(match cfg.run.planner {
        PlannerKind::Fallback => PlannerChoice::Fallback,
        PlannerKind::Neural => PlannerChoice::Neural(weights(cfg)?),
    })
}

fn scenario(cfg: &RunConfig) -> Result<Scenario> {
    match &cfg.paths.scenario {
        Some(p) => parse_json(p),
        None => generate_scenario(cfg.run.seed, cfg.run.layout, &cfg.scenario),
    }
}

fn scenario_gen(cfg: &RunConfig) -> Result<()> {
    let sc = generate_scenario(cfg.run.seed, cfg.run.layout, &cfg.scenario)?;
    let text = json(&sc)?;
    match &cfg.paths.out {
        Some(p) => write(p, text + "\n"),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn episode_run(cfg: &RunConfig) -> Result<()> {
    let sc = scenario(cfg)?;
    let kind = cfg.run.controller.unwrap_or(ControllerKind::Mdd1);
    let mut planner: Box<dyn Planner> = match cfg.run.planner {
        PlannerKind::Fallback => Box::new(FallbackPlanner),
        PlannerKind::Neural => Box::new(NeuralPlanner::new(weights(cfg)?)),
    };
    let log = safenav::sim::run_episode(&sc, planner.as_mut(), kind, &cfg.sim())?;
    let out = cfg.paths.out.clone().unwrap_or_else(|| PathBuf::from("episode.csv"));
    write_episode_csv(&log, &out)?;
    let full = out.with_extension("json");
    write(&full, json(&EpisodeFile { scenario: sc.clone(), log: log.clone() })?)?;
    if let Some(svg) = &cfg.paths.svg {
        write_svg(&log, &sc, cfg.episode.n_facets, cfg.scenario.workspace, svg)?;
    }
    println!(
        "seed {} outcome {:?} steps {} min distance {:.3} m failures {}",
        log.seed,
        log.outcome,
        log.steps.len(),
        log.min_distance(),
        log.failures()
    );
    println!("log: {} and {}", out.display(), full.display());
    Ok(())
}

fn print_report_table(reports: &[BenchmarkReport]) {
    println!(
        "{:<10} {:<9} {:>4} {:>8} {:>12} {:>15} {:>11}",
        "controller", "planner", "n", "success", "planner ms", "controller ms", "max ms"
    );
    for r in reports {
        println!(
            "{:<10} {:<9} {:>4} {:>8.2} {:>12.2} {:>15.2} {:>11.2}",
            format!("{:?}", r.controller).to_lowercase(),
            r.planner,
            r.n,
            r.success_rate,
            1e3 * r.timing.mean_planner_step,
            1e3 * r.timing.mean_controller_step,
            1e3 * r.timing.mean_max_step
        );
    }
}

fn bench(cfg: &RunConfig) -> Result<()> {
    let kinds = match cfg.run.controller {
        Some(k) => vec![k],
        None => vec![ControllerKind::Mdd1, ControllerKind::Dcbf],
    };
    let planner = planner_choice(cfg)?;
    let configs: Vec<BenchConfig> = kinds
        .into_iter()
        .map(|controller| BenchConfig {
            controller,
            planner: planner.clone(),
            sim: cfg.sim(),
        })
        .collect();
    let reports = run_benchmark(cfg.run.n, cfg.run.layout, &configs, cfg.run.seed, &cfg.scenario, cfg.run.workers)?;
    print_report_table(&reports);
    let out = cfg.paths.out.clone().unwrap_or_else(|| PathBuf::from("bench_report.json"));
    write(&out, json(&reports)? + "\n")?;
    println!("report: {}", out.display());
    Ok(())
}

fn dataset_gen(cfg: &RunConfig) -> Result<()> {
    let out = cfg.paths.out.clone().unwrap_or_else(|| PathBuf::from("dataset.jsonl"));
    let written = export_dataset(cfg.run.n, cfg.run.seed, cfg.run.layout, &out, &cfg.scenario, &cfg.sim())?;
    println!("{written} of {} episodes kept -> {}", cfg.run.n, out.display());
    Ok(())
}

fn render(cfg: &RunConfig, episode: &Path) -> Result<()> {
    let file: EpisodeFile = parse_json(episode)?;
    let svg = cfg.paths.svg.clone().unwrap_or_else(|| episode.with_extension("svg"));
    write_svg(&file.log, &file.scenario, cfg.episode.n_facets, cfg.scenario.workspace, &svg)?;
    println!("wrote {}", svg.display());
    Ok(())
}

fn weights_check(path: &Path) -> Result<()> {
    load_weights(&read(path)?)?;
    println!("{:<20} shape", "tensor");
    for (name, shape) in tensor_table() {
        let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        println!("{name:<20} {}", dims.join("x"));
    }
    println!("ok: {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut ov = cli.flags.overrides();
    // Only the commands that load a planner need weights.
    let uses_planner = matches!(cli.command, Command::Episode(_) | Command::Bench);
    if !uses_planner {
        ov.planner = Some(PlannerKind::Fallback);
    }
    let mut cfg = RunConfig::resolve(cli.flags.config.as_deref(), &ov)?;
    if !uses_planner {
        cfg.run.planner = PlannerKind::Fallback;
    }
    match cli.command {
        Command::Scenario(ScenarioCmd::Gen) => scenario_gen(&cfg),
        Command::Episode(EpisodeCmd::Run) => episode_run(&cfg),
        Command::Bench => bench(&cfg),
        Command::Dataset(DatasetCmd::Gen) => dataset_gen(&cfg),
        Command::Render { episode } => render(&cfg, &episode),
        Command::Weights(WeightsCmd::Check { path }) => weights_check(&path),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
