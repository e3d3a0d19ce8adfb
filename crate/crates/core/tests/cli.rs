use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_depthnav"))
}

#[test]
fn train_eval_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"total_episodes": 3, "max_steps": 30, "curriculum_mode": "NaiveEnv2",
            "sac": {"hidden": [8, 8], "batch_size": 8, "warmup": 8, "replay_capacity": 500}}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let st = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--seed", "4", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        st.status.success(),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );
    assert!(out.join("metrics.csv").exists());
    assert!(out.join("transitions.csv").exists());
    let ck = out.join("checkpoint.json");
    let saved: serde_json::Value = serde_json::from_str(&fs::read_to_string(&ck).unwrap()).unwrap();
    assert_eq!(saved["run"]["seed"], 4);

    let st = bin()
        .args(["eval", "--checkpoint"])
        .arg(&ck)
        .args(["--env", "2", "--sessions", "2", "--episodes", "3"])
        .output()
        .unwrap();
    assert!(
        st.status.success(),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&st.stdout).unwrap();
    assert_eq!(report["sessions"].as_array().unwrap().len(), 2);
    assert_eq!(report["env_id"], 2);

    let st = bin()
        .args(["export", "--checkpoint"])
        .arg(&ck)
        .args(["--env", "3", "--seed", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        st.status.success(),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );
    assert!(dir.path().join("trajectory_env3_seed1.csv").exists());
    assert!(dir.path().join("trajectory_env3_seed1.svg").exists());
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"reward": {"gain": 200.0, "r_reched": 500.0}}"#).unwrap();
    let st = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!st.status.success());
    assert!(String::from_utf8_lossy(&st.stderr).contains("r_reched"));
}

#[test]
fn env_argument_is_checked() {
    let st = bin()
        .args(["eval", "--checkpoint", "x.json", "--env", "4"])
        .output()
        .unwrap();
    assert!(!st.status.success());
}
