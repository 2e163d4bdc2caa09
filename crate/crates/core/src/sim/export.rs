use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::episode::{scenario_polytopes, EpisodeLog};
use super::scenario::Scenario;
use crate::controller::StepStatus;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "step,x,y,v,theta,a,delta,ref_x,ref_y,ref_theta,status,solver_status,iterations,planner_time,controller_time,min_distance,min_residual,active_obstacles";

/// Per-step log as CSV. The reference columns hold the first reference pose
/// after the current one; `solver_status` is empty when no solve ran.
pub fn episode_csv(log: &EpisodeLog) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &log.steps {
        let rf = r.reference.get(1).or(r.reference.first()).copied().unwrap_or(r.state);
        let solver = r.solver_status.map(|st| format!("{st:?}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{:?},{},{},{},{},{},{},{}",
            r.step,
            r.state.x,
            r.state.y,
            r.state.v,
            r.state.theta,
            r.control.a,
            r.control.delta,
            rf.x,
            rf.y,
            rf.theta,
            r.status,
            solver,
            r.iterations,
            r.planner_time,
            r.controller_time,
            r.min_distance,
            r.min_residual,
            r.active_obstacles
        );
    }
    s
}

pub fn write_episode_csv(log: &EpisodeLog, path: &Path) -> Result<()> {
    fs::write(path, episode_csv(log)).map_err(|e| Error::io(path, e))
}

const SCALE: f64 = 10.0;
const REFERENCE_EVERY: usize = 10;

/// Top-down SVG of an episode: obstacle polygons, the driven path, every
/// tenth reference and red dots where the solve was not optimal.
pub fn render_svg(log: &EpisodeLog, sc: &Scenario, n_facets: usize, workspace: f64) -> Result<String> {
    let size = workspace * SCALE;
    let px = |x: f64| x * SCALE;
    let py = |y: f64| (workspace - y) * SCALE;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{size}" height="{size}" fill="#ffffff" stroke="#333333"/>"##);
    for poly in scenario_polytopes(sc, n_facets)? {
        let pts: Vec<String> = poly.vertices().iter().map(|v| format!("{:.3},{:.3}", px(v.x), py(v.y))).collect();
        let _ = writeln!(s, r##"<polygon class="obstacle" points="{}" fill="#888888" fill-opacity="0.8" stroke="#444444"/>"##, pts.join(" "));
    }
    for (i, r) in log.steps.iter().enumerate() {
        if i % REFERENCE_EVERY != 0 || r.reference.len() < 2 {
            continue;
        }
        let pts: Vec<String> = r.reference.iter().map(|p| format!("{:.3},{:.3}", px(p.x), py(p.y))).collect();
        let _ = writeln!(s, r##"<polyline class="reference" points="{}" fill="none" stroke="#2a9d8f" stroke-width="1" stroke-dasharray="3,2"/>"##, pts.join(" "));
    }
    let mut path: Vec<(f64, f64)> = log.steps.iter().map(|r| (r.state.x, r.state.y)).collect();
    if let Some(last) = log.steps.last() {
        path.push((last.next_state.x, last.next_state.y));
    }
    match path.len() {
        0 => {}
        1 => {
            let _ = writeln!(s, r##"<circle class="trajectory" cx="{:.3}" cy="{:.3}" r="2" fill="#1d3557"/>"##, px(path[0].0), py(path[0].1));
        }
        _ => {
            let pts: Vec<String> = path.iter().map(|&(x, y)| format!("{:.3},{:.3}", px(x), py(y))).collect();
            let _ = writeln!(s, r##"<polyline class="trajectory" points="{}" fill="none" stroke="#1d3557" stroke-width="2"/>"##, pts.join(" "));
        }
    }
    for r in log.steps.iter().filter(|r| r.status != StepStatus::Optimal) {
        let _ = writeln!(s, r##"<circle class="fallback" cx="{:.3}" cy="{:.3}" r="3" fill="#e63946"/>"##, px(r.state.x), py(r.state.y));
    }
    for (p, class, color) in [(sc.start, "start", "#457b9d"), (sc.goal, "goal", "#f4a261")] {
        let _ = writeln!(s, r#"<circle class="{class}" cx="{:.3}" cy="{:.3}" r="5" fill="{color}"/>"#, px(p.x), py(p.y));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_svg(log: &EpisodeLog, sc: &Scenario, n_facets: usize, workspace: f64, path: &Path) -> Result<()> {
    fs::write(path, render_svg(log, sc, n_facets, workspace)?).map_err(|e| Error::io(path, e))
}
