use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mlgp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlgp"))
        .args(args)
        .current_dir(cwd)
        .env("MLGP_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn synth(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["synth", "--out", "data", "--subjects", "4", "--minutes", "30", "--separable", "--seed", "3"];
    args.extend_from_slice(extra);
    mlgp(&args, dir)
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&synth(d, &["--create"]));
    for s in ["S01", "S04"] {
        assert!(d.join(format!("data/{s}.imu.csv")).exists());
        assert!(d.join(format!("data/{s}.labels.csv")).exists());
    }
    ok(&mlgp(&["featurize", "--data", "data", "--out", "features.csv"], d));
    ok(&mlgp(&["train", "--features", "features.csv", "--out", "model"], d));

    let pred = mlgp(&["predict", "--model", "model", "--input", "data/S02.imu.csv"], d);
    ok(&pred);
    let text = String::from_utf8(pred.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "subject_id,window_index,pred_class,pred_severity,y_tm,y_bk,y_dk"
    );
    assert_eq!(lines.count(), 30);

    ok(&mlgp(&["evaluate", "--features", "features.csv", "--out", "eval", "--folds", "2", "--threads", "1"], d));
    let dump = fs::read_to_string(d.join("eval/predictions.csv")).unwrap();
    let subjects: std::collections::BTreeSet<&str> =
        dump.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(subjects.into_iter().collect::<Vec<_>>(), ["S01", "S02"]);

    let report = mlgp(&["report", "--input", "eval/report.json", "--json"], d);
    ok(&report);
    let v: serde_json::Value = serde_json::from_slice(&report.stdout).unwrap();
    assert_eq!(v["folds"], 2);
    let from_dump = mlgp(&["report", "--input", "eval/predictions.csv"], d);
    ok(&from_dump);
    assert!(String::from_utf8_lossy(&from_dump.stdout).contains("FN/FP"));
}

#[test]
fn synth_refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = synth(d, &[]);
    assert_eq!(missing.status.code(), Some(2));

    ok(&synth(d, &["--create"]));
    let first = fs::read(d.join("data/S03.imu.csv")).unwrap();
    let again = synth(d, &[]);
    assert_ne!(again.status.code(), Some(0));
    ok(&synth(d, &["--force"]));
    assert_eq!(fs::read(d.join("data/S03.imu.csv")).unwrap(), first);
}

#[test]
fn usage_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(mlgp(&["frobnicate"], d).status.code(), Some(2));
    assert_eq!(mlgp(&["predict"], d).status.code(), Some(2));

    fs::write(d.join("bad.toml"), "no_such_key = 1\n").unwrap();
    assert_eq!(mlgp(&["--config", "bad.toml", "config"], d).status.code(), Some(2));

    let cfg = mlgp(&["config"], d);
    ok(&cfg);
    fs::write(d.join("run.toml"), &cfg.stdout).unwrap();
    let round = mlgp(&["--config", "run.toml", "config"], d);
    ok(&round);
    assert_eq!(round.stdout, cfg.stdout);

    let absent = mlgp(&["featurize", "--data", "nowhere", "--out", "f.csv"], d);
    assert_eq!(absent.status.code(), Some(1));
}
