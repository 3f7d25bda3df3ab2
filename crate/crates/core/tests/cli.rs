use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;

fn sozgraph(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sozgraph"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn synth_run_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let spec = json!({
        "num_patients": 2, "sites_per_patient": 16, "duration_state_s": 10.0,
        "ccep_segments": 2, "ccep_duration_s": 1.0, "raw_rate_hz": 4000.0, "seed": 3
    });
    std::fs::write(dir.join("spec.json"), spec.to_string()).unwrap();
    let config = json!({
        "cohort": "cohort", "runs_dir": "runs", "repeats": 1,
        "preprocess": {"feat_len": 16, "ccep_rate_hz": 2000.0},
        "satae": {"input_dim": 16, "latent_dim": 4, "encoder_dims": [16, 12, 8, 6, 4],
                  "decoder_dims": [4, 4, 6, 8, 12], "epochs": 2},
        "hfgcn": {"epochs": 5, "hidden": 8, "knn": 3}
    });
    std::fs::write(dir.join("config.json"), config.to_string()).unwrap();

    let o = sozgraph(dir, &["synth", "--spec", "spec.json", "--out", "cohort"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = sozgraph(dir, &["--config", "config.json", "run", "--sweep", "fusion=full,static_only"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let runs: Vec<_> = std::fs::read_dir(dir.join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1);
    let metrics = std::fs::read_to_string(runs[0].join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 4, "{metrics}");

    let run = runs[0].to_str().unwrap();
    let o = sozgraph(dir, &["report", run]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(table.lines().count(), 1 + 2, "{table}");

    let o = sozgraph(dir, &["report", run, "missing-run"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("not found"));
}

#[test]
fn missing_inputs_name_the_stage_to_run() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sozgraph(tmp.path(), &["preprocess", "--cohort", "nowhere", "--out", "features"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("synth"), "{}", stderr(&o));

    let o = sozgraph(tmp.path(), &["train-sae", "--features", "nowhere", "--out", "sae.ckpt"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("preprocess"), "{}", stderr(&o));
}

#[test]
fn invalid_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.json"), r#"{"repeats": 0}"#).unwrap();
    let o = sozgraph(tmp.path(), &["--config", "bad.json", "run"]);
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(tmp.path().join("typo.json"), r#"{"repeat": 3}"#).unwrap();
    let o = sozgraph(tmp.path(), &["--config", "typo.json", "run"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
