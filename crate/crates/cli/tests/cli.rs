use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use perfed_cli::run;
use perfed_cli::spec::{parse_run_spec, Profile, RunSpec};
use perfed_core::federation::read_model_blob;

fn perfed(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perfed"))
        .args(args)
        .current_dir(dir)
        .env_remove("PERFED_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "seed = 3\n[federation]\nn = 6\nr = 0.5\ntau = 3\nrounds = 20\n[diagnostics]\nenabled = false\n";

#[test]
fn train_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = perfed(&["train", "--config", &cfg, "--out-dir", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["rounds.jsonl", "model.bin", "summary.json", "summary.txt", "timing.json"] {
        assert!(dir.path().join("o").join(f).exists(), "missing {f}");
    }
    let lines = fs::read_to_string(dir.path().join("o/rounds.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 20);
    assert_eq!(read_model_blob(&dir.path().join("o/model.bin")).unwrap().dim(), 5);
    let leftovers: Vec<_> = fs::read_dir(dir.path().join("o"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn same_seed_replays_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for (out_dir, workers) in [("a", "1"), ("b", "3")] {
        let out = Command::new(env!("CARGO_BIN_EXE_perfed"))
            .args(["train", "--config", &cfg, "--out-dir", out_dir])
            .current_dir(dir.path())
            .env("PERFED_WORKERS", workers)
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    for f in ["rounds.jsonl", "model.bin", "summary.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn seed_flag_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    assert!(perfed(&["train", "--config", &cfg, "--out-dir", "a"], dir.path()).status.success());
    assert!(perfed(&["train", "--config", &cfg, "--out-dir", "b", "--seed", "4"], dir.path()).status.success());
    let a = fs::read(dir.path().join("a/rounds.jsonl")).unwrap();
    let b = fs::read(dir.path().join("b/rounds.jsonl")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[federation]\nr = 1.5\n");
    let out = perfed(&["train", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("federation.r"));

    let cfg = write_config(dir.path(), "[federation]\nrounds = 3\nbogus = 1\n");
    let out = perfed(&["train", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let cfg = write_config(dir.path(), "[task]\nfamily = \"quadratic\"\n");
    let out = perfed(&["partition", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_dataset_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[task]\nfamily = \"logistic\"\nimages = \"nope\"\nlabels = \"nope\"\n");
    let out = perfed(&["train", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn diverging_run_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[federation]\nbeta = 1e6\nenforce_step_bound = false\nrounds = 200\n[diagnostics]\nenabled = false\n",
    );
    let out = perfed(&["train", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn diagnose_reports_every_bound_holding_on_quadratics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[diagnostics]\nmc_trials = 2000\npairs = 200\n");
    let out = perfed(&["diagnose", "--config", &cfg, "--out-dir", "d"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(!text.contains("FAIL"), "{text}");
    let reports: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("d/diagnostics.json")).unwrap()).unwrap();
    let names: Vec<&str> = reports.as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    for want in ["meta_smoothness", "meta_dissimilarity", "hf_bias", "hf_mse", "theorem_rhs"] {
        assert!(names.contains(&want), "missing {want}");
    }
    assert!(names.iter().any(|n| n.starts_with("drift_first")));
}

#[test]
fn compare_produces_one_row_per_arm() {
    let spec = parse_run_spec(
        "[federation]\nrounds = 15\n[compare]\nseeds = 3\narms = [\"fedavg\", \"perfedavg-fo\", \"perfedavg-hf\"]\n",
        None,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let rows = run::compare(&spec, dir.path()).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r.per_seed_loss.len(), 3);
        assert!(r.loss.mean.is_finite() && r.loss.half_width >= 0.0);
    }
    let text = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.contains("perfedavg-hf"));
}

#[test]
fn default_spec_round_trips_through_toml() {
    for p in [Profile::Desk, Profile::Paper] {
        let spec = RunSpec::defaults(p);
        assert_eq!(parse_run_spec(&spec.to_toml(), None).unwrap(), spec);
    }
}
