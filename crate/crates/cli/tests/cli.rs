use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn rdpg(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rdpg"));
    cmd.args(args).env_remove("RDPG_OUTPUT_DIR");
    if let Some(dir) = out_dir {
        cmd.env("RDPG_OUTPUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn smoke_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/lq_smoke.json")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Short LQ run: 1500 steps, one snapshot at the end.
fn short_train(dir: &Path) -> Output {
    let cfg = smoke_config();
    rdpg(
        &[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "harness.total_steps=1500",
            "--set",
            "harness.snapshot_every=1500",
        ],
        Some(dir),
    )
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    p
}

fn scalar_game(a: f64, eta: f64) -> Value {
    serde_json::json!({"a": [[a]], "b": [[1.0]], "d": [[1.0]], "q": [[1.0]], "r": [[1.0]], "eta": eta, "gamma": 1.0})
}

#[test]
fn missing_config_names_the_path() {
    let o = rdpg(&["train", "--config", "/nonexistent/run.json"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/run.json"), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(rdpg(&["fly"], None).status.code(), Some(1));
    assert_eq!(rdpg(&["--help"], None).status.code(), Some(0));
}

#[test]
fn invalid_override_lists_the_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config();
    let o = rdpg(&["train", "--config", cfg.to_str().unwrap(), "--set", "agent.batch_size=0"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("batch_size"), "{}", stderr(&o));
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = short_train(dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["resolved_config.json", "learning_curve.csv", "checkpoint.bin"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let resolved: Value = serde_json::from_slice(&std::fs::read(dir.path().join("resolved_config.json")).unwrap()).unwrap();
    assert_eq!(resolved["harness"]["total_steps"], 1500);

    let ck = dir.path().join("checkpoint.bin");
    let o = rdpg(&["eval", "--checkpoint", ck.to_str().unwrap(), "--episodes", "1"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["n_episodes"], 1);
    assert_eq!(report["std_cost"].as_f64(), Some(0.0));
    assert!(dir.path().join("eval_report.json").is_file());
    let csv = std::fs::read_to_string(dir.path().join("eval_episodes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);

    let again = rdpg(&["eval", "--checkpoint", ck.to_str().unwrap(), "--episodes", "1"], None);
    assert_eq!(o.stdout, again.stdout);

    let o = rdpg(&["eval", "--checkpoint", ck.to_str().unwrap(), "--episodes", "0"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn same_seed_same_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(short_train(a.path()).status.success());
    assert!(short_train(b.path()).status.success());
    for f in ["learning_curve.csv", "checkpoint.bin"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn override_and_seed_flag_reach_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config();
    let o = rdpg(
        &[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "agent.eta=5",
            "--set",
            "env.game.eta=5",
            "--set",
            "harness.total_steps=10",
            "--set",
            "harness.snapshot_every=10",
            "--seed",
            "42",
        ],
        Some(dir.path()),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let resolved: Value = serde_json::from_slice(&std::fs::read(dir.path().join("resolved_config.json")).unwrap()).unwrap();
    assert_eq!(resolved["agent"]["eta"].as_f64(), Some(5.0));
    assert_eq!(resolved["seed"], 42);
}

#[test]
fn damaged_checkpoints_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    assert!(short_train(dir.path()).status.success());
    let good = std::fs::read(dir.path().join("checkpoint.bin")).unwrap();

    let mut flipped = good.clone();
    let last = flipped.len() - 1;
    flipped[last] ^= 0x40;
    let p = dir.path().join("flipped.bin");
    std::fs::write(&p, &flipped).unwrap();
    let o = rdpg(&["eval", "--checkpoint", p.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(!stderr(&o).contains("panicked"));

    let p = dir.path().join("truncated.bin");
    std::fs::write(&p, &good[..good.len() / 2]).unwrap();
    assert_eq!(rdpg(&["eval", "--checkpoint", p.to_str().unwrap()], None).status.code(), Some(1));

    let mut future = good.clone();
    future[8..12].copy_from_slice(&99u32.to_le_bytes());
    let p = dir.path().join("future.bin");
    std::fs::write(&p, &future).unwrap();
    let o = rdpg(&["eval", "--checkpoint", p.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("99") && msg.contains('1'), "{msg}");
}

#[test]
fn oracle_reports_the_saddle_point() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_json(dir.path(), "game.json", &scalar_game(0.9, 2.0));
    let o = rdpg(&["oracle", "--config", p.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let p_val = v["p_matrix"][0][0].as_f64().unwrap();
    assert!((p_val - 1.5868864269848268).abs() < 1e-9, "{p_val}");
    assert!(v["closed_loop_hinf_norm"].as_f64().unwrap() <= 2.0 + 1e-6);

    let run_cfg = rdpg(&["oracle", "--config", smoke_config().to_str().unwrap()], None);
    assert!(run_cfg.status.success(), "{}", stderr(&run_cfg));
}

#[test]
fn oracle_without_dynamics_returns_the_state_cost() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_json(dir.path(), "static.json", &scalar_game(0.0, 2.0));
    let o = rdpg(&["oracle", "--config", p.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["p_matrix"][0][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["k_gain"][0][0].as_f64(), Some(0.0));
    assert_eq!(v["l_gain"][0][0].as_f64(), Some(0.0));
}

#[test]
fn infeasible_attenuation_level_is_an_acceptance_failure() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_json(dir.path(), "tight.json", &scalar_game(0.9, 1.0));
    let o = rdpg(&["oracle", "--config", p.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("infeasible"), "{}", stderr(&o));
}

#[test]
fn gradcheck_passes_and_is_reproducible() {
    let a = rdpg(&["gradcheck", "--seed", "3"], None);
    assert!(a.status.success(), "{}", stderr(&a));
    let b = rdpg(&["gradcheck", "--seed", "3"], None);
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert!(v["max_relative_error"].as_f64().unwrap() < 1e-5);
}

#[test]
fn corrupted_gradients_are_caught() {
    for which in ["param", "input", "actor", "critic"] {
        let o = rdpg(&["gradcheck", "--corrupt", which], None);
        assert_eq!(o.status.code(), Some(3), "{which}");
    }
}
