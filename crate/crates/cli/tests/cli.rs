use std::process::Command;

use clutter_core::harness::ExperimentConfig;

fn clutter(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_clutter")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn printed_config_loads_back() {
    let out = clutter(&["config"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), ExperimentConfig::default());
}

#[test]
fn run_prints_an_episode_log() {
    let out = clutter(&["run", "--scene-seed", "3", "--policy", "smart", "--budget", "1"]);
    let log: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(log["scene_seed"], 3);
    assert_eq!(log["policy"], "smart");
    assert!(log["motions"].as_u64().unwrap() <= 1);
}

#[test]
fn render_writes_views_and_maps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    clutter(&["render", "--scene-seed", "2", "--views", "3", "--out", out]);
    for name in ["scene.toml", "view0_depth.png", "view2_depth.png", "uncertainty.png", "entropy.csv", "height.csv"] {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
    assert!(!dir.path().join("view3_depth.png").exists());
}

#[test]
fn unknown_policy_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_clutter"))
        .args(["run", "--policy", "greedy"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
