mod common;

use std::collections::HashMap;

use safenav::dynamics::State;
use safenav::geometry::{circle_to_polytope, Circle, Pose2D};
use safenav::planner::FallbackPlanner;
use safenav::sim::*;

fn free_config() -> ScenarioConfig {
    ScenarioConfig {
        count_range: [0, 0],
        ..ScenarioConfig::default()
    }
}

fn fallback_bench(controller: ControllerKind) -> BenchConfig {
    BenchConfig {
        controller,
        planner: PlannerChoice::Fallback,
        sim: SimConfig::default(),
    }
}

#[test]
fn scenarios_satisfy_their_invariants() {
    let cfg = ScenarioConfig::default();
    for seed in 0..300 {
        for layout in [Layout::Square, Layout::Line] {
            let sc = generate_scenario(seed, layout, &cfg).unwrap();
            assert!((4..=6).contains(&sc.obstacles.len()));
            for c in &sc.obstacles {
                assert!((1.0..=4.0).contains(&c.radius));
                assert!((0.0..=50.0).contains(&c.center.x) && (0.0..=50.0).contains(&c.center.y));
                for end in [&sc.start, &sc.goal] {
                    assert!((end.position() - c.center).norm() - c.radius >= 1.0, "seed {seed} {layout:?}");
                }
                if layout == Layout::Line {
                    assert!((18.0..=32.0).contains(&c.center.y));
                }
            }
            match layout {
                Layout::Square => {
                    for v in [sc.start.x, sc.start.y] {
                        assert!((2.0..=10.0).contains(&v));
                    }
                    for v in [sc.goal.x, sc.goal.y] {
                        assert!((40.0..=48.0).contains(&v));
                    }
                    let near_diagonal = sc
                        .obstacles
                        .iter()
                        .filter(|c| (c.center.y - c.center.x).abs() / 2f64.sqrt() <= 5.0)
                        .count();
                    assert!(near_diagonal >= sc.obstacles.len() / 2, "seed {seed}");
                }
                Layout::Line => {
                    assert_eq!((sc.start.x, sc.start.y, sc.start.theta), (5.0, 25.0, 0.0));
                    assert_eq!((sc.goal.x, sc.goal.y), (45.0, 25.0));
                }
            }
        }
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = serde_json::to_string(&generate_scenario(42, Layout::Square, &ScenarioConfig::default()).unwrap()).unwrap();
    let b = serde_json::to_string(&generate_scenario(42, Layout::Square, &ScenarioConfig::default()).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn obstacle_counts_are_uniform() {
    let cfg = ScenarioConfig::default();
    let n = 10_000;
    let mut hist: HashMap<usize, usize> = HashMap::new();
    for seed in 0..n {
        *hist.entry(generate_scenario(seed, Layout::Square, &cfg).unwrap().obstacles.len()).or_default() += 1;
    }
    let p = 1.0 / 3.0;
    let mean = n as f64 * p;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    for k in 4..=6 {
        let c = hist.get(&k).copied().unwrap_or(0) as f64;
        assert!((c - mean).abs() <= 3.0 * sigma, "count {k}: {c} vs {mean} +- {}", 3.0 * sigma);
    }
}

#[test]
fn collision_checks() {
    let polys = vec![circle_to_polytope(&Circle::new(20.0, 20.0, 2.0), 8).unwrap()];
    assert!(!check_collision(&State::new(5.0, 5.0, 0.0, 0.0), &polys));
    assert!(check_collision(&State::new(20.0, 20.0, 0.0, 0.0), &polys));
    // On the facet x = 22 exactly.
    assert!(check_collision(&State::new(22.0, 20.0, 0.0, 0.0), &polys));
    assert!(!check_collision(&State::new(22.0 + 1e-9, 20.0, 0.0, 0.0), &polys));
}

#[test]
fn free_scenario_succeeds_and_logs_are_reproducible() {
    let sc = generate_scenario(0, Layout::Square, &free_config()).unwrap();
    let cfg = SimConfig::default();
    let a = run_episode(&sc, &mut FallbackPlanner, ControllerKind::Mdd1, &cfg).unwrap();
    assert_eq!(a.outcome, Outcome::Success);
    assert!(a.steps.iter().all(|s| s.min_distance > 0.0 && s.status.applied()));
    let b = run_episode(&sc, &mut FallbackPlanner, ControllerKind::Mdd1, &cfg).unwrap();
    let untimed = |log: &EpisodeLog| {
        let mut log = log.clone();
        for s in &mut log.steps {
            s.planner_time = 0.0;
            s.controller_time = 0.0;
        }
        log
    };
    assert_eq!(untimed(&a), untimed(&b));
    // Nothing to measure against: distances are infinite and must survive JSON.
    assert_eq!(a.min_distance(), f64::INFINITY);
    let back: EpisodeLog = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn start_inside_an_obstacle_aborts_at_once() {
    let mut sc = generate_scenario(0, Layout::Square, &ScenarioConfig::default()).unwrap();
    sc.obstacles.push(Circle::new(sc.start.x, sc.start.y, 1.5));
    for kind in [ControllerKind::Mdd1, ControllerKind::Dcbf] {
        let log = run_episode(&sc, &mut FallbackPlanner, kind, &SimConfig::default()).unwrap();
        assert_eq!(log.outcome, Outcome::SolverAbort, "{kind:?}");
        assert_eq!(log.steps.len(), 1);
    }
}

#[test]
fn csv_has_one_row_per_step() {
    let sc = generate_scenario(0, Layout::Square, &free_config()).unwrap();
    let log = run_episode(&sc, &mut FallbackPlanner, ControllerKind::Mdd1, &SimConfig::default()).unwrap();
    let csv = episode_csv(&log);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let cols = CSV_HEADER.split(',').count();
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), log.steps.len());
    assert!(rows.iter().all(|r| r.split(',').count() == cols));
    let first: Vec<f64> = rows[0].split(',').take(3).map(|v| v.parse().unwrap()).collect();
    assert_eq!(first, vec![0.0, sc.start.x, sc.start.y]);
}

fn by_class(svg: &str) -> HashMap<String, Vec<String>> {
    let doc = roxmltree::Document::parse(svg).expect("well-formed XML");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let mut out: HashMap<String, Vec<String>> = HashMap::new();
    for n in doc.descendants().filter(|n| n.is_element()) {
        if let Some(c) = n.attribute("class") {
            let payload = n.attribute("points").unwrap_or("").to_string();
            out.entry(c.to_string()).or_default().push(payload);
        }
    }
    out
}

#[test]
fn svg_renders_empty_and_single_step_logs() {
    let sc = generate_scenario(1, Layout::Square, &ScenarioConfig::default()).unwrap();
    let empty = EpisodeLog {
        seed: 1,
        controller: ControllerKind::Mdd1,
        steps: vec![],
        outcome: Outcome::Timeout,
    };
    let classes = by_class(&render_svg(&empty, &sc, 8, 50.0).unwrap());
    assert_eq!(classes["obstacle"].len(), sc.obstacles.len());
    assert!(classes["obstacle"].iter().all(|p| p.split_whitespace().count() == 8));
    assert!(!classes.contains_key("trajectory"));
    assert_eq!((classes["start"].len(), classes["goal"].len()), (1, 1));

    let cfg = SimConfig {
        episode: EpisodeConfig {
            max_steps: 1,
            ..EpisodeConfig::default()
        },
        ..SimConfig::default()
    };
    let one = run_episode(&sc, &mut FallbackPlanner, ControllerKind::Mdd1, &cfg).unwrap();
    assert_eq!(one.steps.len(), 1);
    let classes = by_class(&render_svg(&one, &sc, 8, 50.0).unwrap());
    // The state before and after the single step.
    assert_eq!(classes["trajectory"].len(), 1);
    assert_eq!(classes["trajectory"][0].split_whitespace().count(), 2);
    assert_eq!(classes["reference"].len(), 1);
}

#[test]
fn dataset_round_trips_and_passes_audit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.jsonl");
    let written = export_dataset(3, 10, Layout::Square, &path, &free_config(), &SimConfig::default()).unwrap();
    assert!(written <= 3);
    let recs = read_dataset(&path).unwrap();
    assert_eq!(recs.len(), written);
    for r in &recs {
        assert!(r.trajectory.len() >= MIN_TRAJECTORY_POSES);
        assert!(audit_record(r, 8).unwrap());
        let line = serde_json::to_string(r).unwrap();
        let back: DatasetRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(&back, r);
    }
    let text = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["seed", "layout", "start", "goal", "obstacles", "trajectory"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["start"].as_array().unwrap().len(), 3);
}

#[test]
fn audit_rejects_short_or_colliding_trajectories() {
    let sc = generate_scenario(0, Layout::Square, &ScenarioConfig::default()).unwrap();
    let c = sc.obstacles[0];
    let mut rec = DatasetRecord {
        seed: 0,
        layout: Layout::Square,
        start: sc.start,
        goal: sc.goal,
        obstacles: sc.obstacles.clone(),
        trajectory: vec![sc.start; MIN_TRAJECTORY_POSES - 1],
    };
    assert!(!audit_record(&rec, 8).unwrap());
    rec.trajectory.push(sc.start);
    assert!(audit_record(&rec, 8).unwrap());
    rec.trajectory.push(Pose2D::new(c.center.x, c.center.y, 0.0));
    assert!(!audit_record(&rec, 8).unwrap());
}

#[test]
fn free_bench_succeeds_everywhere() {
    let reports = run_benchmark(1, Layout::Square, &[fallback_bench(ControllerKind::Mdd1)], 0, &free_config(), 1).unwrap();
    assert_eq!(reports[0].success_rate, 1.0);
    assert_eq!(reports[0].n, 1);
}

#[test]
fn bench_is_reproducible_across_worker_counts() {
    let configs = [fallback_bench(ControllerKind::Mdd1), fallback_bench(ControllerKind::Dcbf)];
    let cfg = ScenarioConfig {
        count_range: [1, 2],
        ..ScenarioConfig::default()
    };
    let a = run_benchmark(2, Layout::Line, &configs, 5, &cfg, 1).unwrap();
    let b = run_benchmark(2, Layout::Line, &configs, 5, &cfg, 2).unwrap();
    let json = |r: &Vec<BenchmarkReport>| serde_json::to_string(&strip_timing(&serde_json::to_value(r).unwrap())).unwrap();
    assert_eq!(json(&a), json(&b));
    // Both configs saw the same seeds.
    let seeds = |r: &BenchmarkReport| r.episodes.iter().map(|e| e.seed).collect::<Vec<_>>();
    assert_eq!(seeds(&a[0]), vec![5, 6]);
    assert_eq!(seeds(&a[0]), seeds(&a[1]));
    for r in &a {
        let s = r.episodes.iter().filter(|e| e.outcome == Outcome::Success).count();
        assert_eq!(r.success_rate, s as f64 / r.n as f64);
        // Success never coexists with contact.
        for e in &r.episodes {
            if e.outcome == Outcome::Success {
                assert!(e.min_distance > 0.0);
            }
        }
    }
}
