mod common;

use std::path::Path;
use std::process::{Command, Output};

use tesmr_core::synthetic::SyntheticConfig;

fn tesmr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tesmr"))
        .args(args)
        .env_remove("TESMR_LLM_URL")
        .env_remove("TESMR_EMB_URL")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn setup(extra: &str) -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    common::write_raw(
        dir.path(),
        &SyntheticConfig {
            n_users: 60,
            n_recipes: 40,
            min_per_user: 6,
            max_per_user: 10,
            ..SyntheticConfig::default()
        },
    );
    let cfg = common::write_config(dir.path(), extra);
    (dir, cfg.display().to_string())
}

fn ok(o: &Output) {
    assert_eq!(o.status.code(), Some(0), "stdout: {}\nstderr: {}", String::from_utf8_lossy(&o.stdout), stderr(o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(tesmr(&[]).status.code(), Some(1));
    let o = tesmr(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(tesmr(&["ingest", "--bogus"]).status.code(), Some(1));
    assert_eq!(tesmr(&["ingest", "--set", "no.such.key=1"]).status.code(), Some(1));
    assert_eq!(tesmr(&["--help"]).status.code(), Some(0));
    let v = tesmr(&["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).contains("-g"));
}

#[test]
fn ingest_writes_dataset_dir_and_run_record() {
    let (dir, cfg) = setup("");
    ok(&tesmr(&["ingest", "--config", &cfg]));
    for f in ["graph.bin", "splits.csv", "docs.jsonl", "users.jsonl", "stats.json"] {
        assert!(dir.path().join("data").join(f).exists(), "{f}");
    }
    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/run.json")).unwrap()).unwrap();
    assert_eq!(run["command"], "ingest");
    assert_eq!(run["config"]["train.layers"], "1");
    assert!(run["version"].as_str().unwrap().starts_with('v'));
    assert!(!dir.path().join("out/.tesmr.lock").exists());
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::write_config(dir.path(), "");
    let o = tesmr(&["ingest", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("recipe file"), "{}", stderr(&o));
}

#[test]
fn train_without_embeddings_exits_two() {
    let (_dir, cfg) = setup("");
    ok(&tesmr(&["ingest", "--config", &cfg]));
    let o = tesmr(&["train", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing embeddings"), "{}", stderr(&o));
}

#[test]
fn locked_output_dir_is_refused() {
    let (dir, cfg) = setup("");
    std::fs::create_dir_all(dir.path().join("out")).unwrap();
    std::fs::write(dir.path().join("out/.tesmr.lock"), "1").unwrap();
    let o = tesmr(&["ingest", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("locked"), "{}", stderr(&o));
}

fn report_ks(path: &Path) -> Vec<u64> {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["mean"]["ks"].as_array().unwrap().iter().map(|k| k.as_u64().unwrap()).collect()
}

#[test]
fn full_pipeline_and_replay_from_run_record() {
    let (dir, cfg) = setup("");
    for cmd in ["ingest", "summarize", "encode", "train"] {
        ok(&tesmr(&[cmd, "--config", &cfg]));
    }
    let o = tesmr(&["evaluate", "--config", &cfg, "--set", "eval.k=10,20"]);
    ok(&o);
    assert!(String::from_utf8_lossy(&o.stdout).contains("R@10"));
    let report = dir.path().join("out/reports/full.json");
    assert_eq!(report_ks(&report), vec![10, 20]);
    ok(&tesmr(&["evaluate", "--config", &cfg, "--set", "eval.k=5"]));
    assert_eq!(report_ks(&report), vec![5]);

    ok(&tesmr(&["mp-baseline", "--config", &cfg]));
    let o = tesmr(&["report", "--config", &cfg]);
    ok(&o);
    let table = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(table.contains("full") && table.contains("mp_baseline"), "{table}");

    // Replaying a train run from its run.json reproduces the checkpoint.
    ok(&tesmr(&["train", "--config", &cfg, "--set", "train.seed=3"]));
    let ckpt = dir.path().join("out/checkpoints/full-seed3.ckpt");
    let first = std::fs::read(&ckpt).unwrap();
    let replay = dir.path().join("replay.json");
    std::fs::copy(dir.path().join("out/run.json"), &replay).unwrap();
    std::fs::remove_file(&ckpt).unwrap();
    ok(&tesmr(&["train", "--config", replay.to_str().unwrap()]));
    assert_eq!(std::fs::read(&ckpt).unwrap(), first);

    let o = tesmr(&["evaluate", "--config", &cfg, "--set", "variant.name=mp_baseline"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tesmr(&["evaluate", "--config", &cfg, "--set", "train.layers=2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("different model configuration"), "{}", stderr(&o));
}

#[test]
fn sweep_writes_csv() {
    let (dir, cfg) = setup("[sweep]\ntau = 0.5\nlambda_cl = 0.0003\nlayers = 1,2\n");
    for cmd in ["ingest", "summarize", "encode"] {
        ok(&tesmr(&[cmd, "--config", &cfg]));
    }
    ok(&tesmr(&["sweep", "--config", &cfg, "--set", "eval.seeds=0"]));
    let csv = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "tau,lambda_cl,K,seed,ndcg20,recall10");
    assert_eq!(lines.len(), 3);
}
