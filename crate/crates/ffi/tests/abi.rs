use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use safenav_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { sn_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0, "expected an error message");
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn pose(x: f64, y: f64, theta: f64) -> SnPose {
    SnPose { x, y, theta }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(sn_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn dubins_straight_line() {
    let mut len = 0.0;
    let st = unsafe { sn_dubins_length(pose(0.0, 0.0, 0.0), pose(10.0, 0.0, 0.0), 3.0, &mut len) };
    assert_eq!(st, SnStatus::Ok);
    assert!((len - 10.0).abs() < 1e-9);
}

#[test]
fn null_and_bad_arguments_are_reported() {
    let st = unsafe { sn_dubins_length(pose(0.0, 0.0, 0.0), pose(1.0, 0.0, 0.0), 3.0, ptr::null_mut()) };
    assert_eq!(st, SnStatus::NullPointer);
    assert!(last_error().contains("out_length"));

    let mut len = 0.0;
    let st = unsafe { sn_dubins_length(pose(0.0, 0.0, 0.0), pose(1.0, 0.0, 0.0), -1.0, &mut len) };
    assert_eq!(st, SnStatus::InvalidArgument);
    assert!(last_error().contains("r_min"));

    // A success clears the message.
    let st = unsafe { sn_dubins_length(pose(0.0, 0.0, 0.0), pose(1.0, 0.0, 0.0), 3.0, &mut len) };
    assert_eq!(st, SnStatus::Ok);
    assert_eq!(unsafe { sn_last_error(ptr::null_mut(), 0) }, 0);
}

#[test]
fn scenarios_are_deterministic() {
    let mut got = Vec::new();
    for _ in 0..2 {
        let mut sc = ptr::null_mut();
        assert_eq!(unsafe { sn_scenario_generate(42, SnLayout::Square, &mut sc) }, SnStatus::Ok);
        let (mut start, mut goal, mut n) = (SnPose::default(), SnPose::default(), 0usize);
        assert_eq!(unsafe { sn_scenario_info(sc, &mut start, &mut goal, &mut n) }, SnStatus::Ok);
        assert!((4..=6).contains(&n));
        let mut obs = vec![SnCircle::default(); n + 2];
        let mut written = 0;
        assert_eq!(unsafe { sn_scenario_obstacles(sc, obs.as_mut_ptr(), obs.len(), &mut written) }, SnStatus::Ok);
        assert_eq!(written, n);
        obs.truncate(n);
        got.push((start, goal, obs));
        unsafe { sn_scenario_free(sc) };
    }
    assert_eq!(got[0], got[1]);
}

#[test]
fn bad_config_names_the_key() {
    let toml = CString::new("[controller]\ngamma = 2.0\n").unwrap();
    let mut ctrl = ptr::null_mut();
    let st = unsafe { sn_controller_new(SnControllerKind::Mdd1, toml.as_ptr(), &mut ctrl) };
    assert_eq!(st, SnStatus::InvalidConfig);
    assert!(ctrl.is_null());
    assert!(last_error().contains("controller.gamma"));
}

#[test]
fn controller_tracks_a_straight_reference() {
    let mut ctrl = ptr::null_mut();
    assert_eq!(unsafe { sn_controller_new(SnControllerKind::Mdd1, ptr::null(), &mut ctrl) }, SnStatus::Ok);
    let n = unsafe { sn_controller_horizon(ctrl) };
    assert_eq!(n, 11);
    let reference: Vec<SnState> = (0..=n)
        .map(|k| SnState { x: 0.2 * k as f64, y: 0.0, v: 2.0, theta: 0.0 })
        .collect();
    let far = [SnCircle { cx: 40.0, cy: 40.0, r: 1.0 }];
    let (mut u, mut status) = (SnControl::default(), SnStepStatus::SolverFailure);
    let st = unsafe {
        sn_controller_step(
            ctrl,
            SnState { x: 0.0, y: 0.0, v: 0.0, theta: 0.0 },
            reference.as_ptr(),
            reference.len(),
            far.as_ptr(),
            far.len(),
            &mut u,
            &mut status,
        )
    };
    assert_eq!(st, SnStatus::Ok);
    assert_eq!(status, SnStepStatus::Optimal);
    assert!(u.a > 0.0 && u.delta.abs() < 1e-6, "{u:?}");

    // Too-short reference is an argument error, not a crash.
    let st = unsafe { sn_controller_step(ctrl, SnState::default(), reference.as_ptr(), 3, ptr::null(), 0, &mut u, &mut status) };
    assert_eq!(st, SnStatus::InvalidArgument);
    assert_eq!(unsafe { sn_controller_reset(ctrl) }, SnStatus::Ok);
    unsafe { sn_controller_free(ctrl) };
}

#[test]
fn free_scenario_episode_succeeds() {
    let json = CString::new(r#"{"seed":0,"layout":"square","start":[5,5,0.7],"goal":[40,40,0.7],"obstacles":[]}"#).unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { sn_scenario_from_json(json.as_ptr(), &mut sc) }, SnStatus::Ok);
    let mut summary = SnEpisodeSummary { outcome: SnOutcome::Timeout, steps: 0, min_distance: 0.0, failures: 9 };
    let st = unsafe { sn_episode_run(sc, ptr::null(), SnControllerKind::Mdd1, ptr::null(), &mut summary) };
    assert_eq!(st, SnStatus::Ok);
    assert_eq!(summary.outcome, SnOutcome::Success);
    assert_eq!(summary.failures, 0);
    unsafe { sn_scenario_free(sc) };
}

#[test]
fn malformed_inputs() {
    let bad = CString::new("{not json").unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { sn_scenario_from_json(bad.as_ptr(), &mut sc) }, SnStatus::InvalidArgument);
    assert!(sc.is_null());

    let path = CString::new("/nonexistent/weights.json").unwrap();
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { sn_weights_load(path.as_ptr(), &mut w) }, SnStatus::Io);
    assert!(last_error().contains("/nonexistent/weights.json"));

    // Freeing null is a no-op.
    unsafe {
        sn_scenario_free(ptr::null_mut());
        sn_weights_free(ptr::null_mut());
        sn_controller_free(ptr::null_mut());
    }
}

/// Builds `smoke.c` against the generated header and the static library.
#[test]
fn c_program_links_against_the_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libsafenav_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let exe = profile_dir.join("safenav_ffi_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}", out.status);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
