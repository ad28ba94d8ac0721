use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qoe_core::features::encoded_columns;
use tempfile::TempDir;

const S1: &str = r#"{
  "video_id": "v1",
  "ladder": [
    {"index": 1, "bitrate_kbps": 235, "width": 320, "height": 240},
    {"index": 2, "bitrate_kbps": 500, "width": 640, "height": 360},
    {"index": 3, "bitrate_kbps": 1000, "width": 1280, "height": 720},
    {"index": 4, "bitrate_kbps": 1500, "width": 1280, "height": 720},
    {"index": 5, "bitrate_kbps": 2000, "width": 1920, "height": 1080},
    {"index": 6, "bitrate_kbps": 2500, "width": 1920, "height": 1080},
    {"index": 7, "bitrate_kbps": 3000, "width": 1920, "height": 1080},
    {"index": 8, "bitrate_kbps": 4000, "width": 1920, "height": 1080},
    {"index": 9, "bitrate_kbps": 5000, "width": 1920, "height": 1080},
    {"index": 10, "bitrate_kbps": 6000, "width": 1920, "height": 1080},
    {"index": 11, "bitrate_kbps": 7000, "width": 1920, "height": 1080}
  ],
  "initial_buffering_s": 2,
  "segments": [{"level": 3, "duration_s": 4}, {"level": 5, "duration_s": 4}],
  "stalls": [{"after_playback_s": 4, "duration_s": 1}]
}"#;

const META: &str = "video_id,fps,si,ti,content,motion,mean_seq_psnr\nv1,24,53,66,movie,smooth,\n";

fn qoe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qoe")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn session_dir(dir: &TempDir) -> (PathBuf, PathBuf) {
    let sessions = dir.path().join("sessions");
    fs::create_dir(&sessions).unwrap();
    fs::write(sessions.join("s1.json"), S1).unwrap();
    let meta = dir.path().join("meta.csv");
    fs::write(&meta, META).unwrap();
    (sessions, meta)
}

/// One row per entry, every encoded column zero, optional PSNR override.
fn zero_table(dir: &TempDir, psnr: bool) -> PathBuf {
    let cols: Vec<String> = encoded_columns().into_iter().filter(|c| psnr || c != "mean_seq_psnr_db").collect();
    let mut csv = format!("session_id,{}\n", cols.join(","));
    csv += &format!("z,{}\n", vec!["0"; cols.len()].join(","));
    let path = dir.path().join(if psnr { "zeros.csv" } else { "zeros_nopsnr.csv" });
    fs::write(&path, csv).unwrap();
    path
}

/// `n` rows of two informative columns, a duplicate of the first, and `mos`.
fn training_table(dir: &TempDir, n: usize) -> PathBuf {
    let mut csv = String::from("session_id,average_rendered_bitrate_kbps,rebuffer_percentage,initial_buffer_time_s,mos\n");
    for i in 0..n {
        let b = 300.0 + ((i * 37) % n) as f64 * 40.0;
        let r = ((i * 11) % 7) as f64 / 20.0;
        let init = (i % 5) as f64;
        let mos = (20.0 + b / 100.0 - 30.0 * r + ((i * 13) % 5) as f64).clamp(1.0, 99.0);
        csv += &format!("s{i},{b},{r},{init},{mos}\n");
    }
    let path = dir.path().join("train.csv");
    fs::write(&path, csv).unwrap();
    path
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn extract_one_session_matches_hand_values() {
    let dir = TempDir::new().unwrap();
    let (sessions, meta) = session_dir(&dir);
    let out = stdout(&qoe(&["extract", "--input", p(&sessions), "--meta", p(&meta)]));
    assert_eq!(out.lines().count(), 2);
    let num = |c: &str| column(&out, c)[0].parse::<f64>().unwrap();
    assert_eq!(column(&out, "session_id"), ["s1"]);
    assert!((num("rebuffer_percentage") - 1.0 / 9.0).abs() < 1e-12);
    assert_eq!(num("average_rendered_bitrate_kbps"), 1500.0);
    assert_eq!(num("average_video_resolution_px2"), 1_440_000.0);
    assert!((num("frequency_of_stalling_per_s") - 1.0 / 11.0).abs() < 1e-12);
    assert_eq!(num("ratio_sequence_level_max_half"), 0.0);
    assert_eq!(column(&out, "ratio_sequence_level_max_half"), ["0"]);
    assert_eq!(num("content_movie"), 1.0);
    assert_eq!(column(&out, "mean_seq_psnr_db"), [""]);
}

#[test]
fn extract_empty_dir_fails() {
    let dir = TempDir::new().unwrap();
    let (_, meta) = session_dir(&dir);
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = qoe(&["extract", "--input", p(&empty), "--meta", p(&meta)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no sessions found"));
}

#[test]
fn extract_reports_bad_sessions_per_file() {
    let dir = TempDir::new().unwrap();
    let (sessions, meta) = session_dir(&dir);
    fs::write(sessions.join("bad.json"), S1.replace(r#""level": 5"#, r#""level": 12"#)).unwrap();
    let o = qoe(&["extract", "--input", p(&sessions), "--meta", p(&meta)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json"));
}

#[test]
fn score_zero_vector_with_builtins() {
    let dir = TempDir::new().unwrap();
    let zeros = zero_table(&dir, true);
    let mos = |model: &str| -> f64 {
        let out = stdout(&qoe(&["score", "--input", p(&zeros), "--model", model]));
        assert_eq!(out.lines().next().unwrap(), "session_id,raw_v,mos");
        column(&out, "mos")[0].parse().unwrap()
    };
    assert_eq!(mos("gb-top10-linear"), 37.72);
    assert!((mos("lasso-reference-free") - 57.69).abs() < 0.005);
    assert!((mos("lasso-full") - 100.0 / (1.0 + (-0.11f64).exp())).abs() < 1e-12);
}

#[test]
fn score_lasso_full_needs_psnr() {
    let dir = TempDir::new().unwrap();
    let zeros = zero_table(&dir, false);
    let o = qoe(&["score", "--input", p(&zeros), "--model", "lasso-full"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mean_seq_psnr"));
}

#[test]
fn unknown_model_lists_builtins() {
    let dir = TempDir::new().unwrap();
    let zeros = zero_table(&dir, true);
    let o = qoe(&["score", "--input", p(&zeros), "--model", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for name in ["gb-top10-linear", "lasso-full", "lasso-reference-free"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn score_sessions_directly() {
    let dir = TempDir::new().unwrap();
    let (sessions, meta) = session_dir(&dir);
    let out = stdout(&qoe(&["score", "--input", p(&sessions), "--meta", p(&meta), "--model", "lasso-reference-free"]));
    let raw: f64 = column(&out, "raw_v")[0].parse().unwrap();
    assert!((raw - -0.510_567_676_767_676_8).abs() < 1e-12);
}

#[test]
fn exported_model_scores_like_builtin() {
    let dir = TempDir::new().unwrap();
    let zeros = zero_table(&dir, true);
    let (sessions, meta) = session_dir(&dir);
    let features = dir.path().join("features.csv");
    stdout(&qoe(&["extract", "--input", p(&sessions), "--meta", p(&meta), "--output", p(&features)]));
    for name in ["gb-top10-linear", "lasso-full", "lasso-reference-free"] {
        let exported = dir.path().join(format!("{name}.json"));
        stdout(&qoe(&["export-model", "--model", name, "--output", p(&exported)]));
        for input in [&zeros, &features] {
            let a = qoe(&["score", "--input", p(input), "--model", name]);
            let b = qoe(&["score", "--input", p(input), "--model", p(&exported)]);
            assert_eq!(a.status.code(), b.status.code(), "{name}");
            assert_eq!(a.stdout, b.stdout, "{name}");
        }
    }
}

#[test]
fn split_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let table = training_table(&dir, 57);
    let run = |out: &str| {
        let path = dir.path().join(out);
        stdout(&qoe(&["split", "--input", p(&table), "--ratios", "8,1,1", "--seed", "7", "--output", p(&path)]));
        fs::read_to_string(path).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(a, b);
    let labels = column(&a, "partition");
    assert_eq!(labels.len(), 57);
    assert!(labels.iter().filter(|l| *l == "train").count() >= 40);
}

fn weights(model_json: &str) -> Vec<(String, f64)> {
    let v: serde_json::Value = serde_json::from_str(model_json).unwrap();
    let mut w: Vec<(String, f64)> =
        v["weights"].as_object().unwrap().iter().map(|(k, x)| (k.clone(), x.as_f64().unwrap())).collect();
    w.push(("w0".into(), v["w0"].as_f64().unwrap()));
    w
}

#[test]
fn lasso_without_penalty_matches_ols() {
    let dir = TempDir::new().unwrap();
    let table = training_table(&dir, 80);
    let cols = "average_rendered_bitrate_kbps,rebuffer_percentage,initial_buffer_time_s";
    let fit = |learner: &str, extra: &[&str]| {
        let model = dir.path().join(format!("{learner}.json"));
        let report = dir.path().join(format!("{learner}.report.csv"));
        let mut args = vec!["train", learner, "--input", p(&table), "--columns", cols];
        args.extend(["--output", p(&model), "--report", p(&report)]);
        args.extend(extra);
        stdout(&qoe(&args));
        let r = fs::read_to_string(report).unwrap();
        assert_eq!(r.lines().next().unwrap(), "partition,n,srcc,p_value,mae");
        assert_eq!(r.lines().count(), 4);
        fs::read_to_string(model).unwrap()
    };
    let ols = weights(&fit("ols", &[]));
    let lasso = weights(&fit("lasso", &["--alpha", "0", "--max-iter", "1000000"]));
    assert_eq!(ols.len(), lasso.len());
    for ((ka, a), (kb, b)) in ols.iter().zip(&lasso) {
        assert_eq!(ka, kb);
        assert!((a - b).abs() < 1e-6, "{ka}: {a} vs {b}");
    }
}

#[test]
fn singular_design_exits_3() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("session_id,average_rendered_bitrate_kbps,rebuffer_percentage,mos\n");
    for i in 0..40 {
        csv += &format!("s{i},{},{},{}\n", i as f64, 2.0 * i as f64, 10.0 + i as f64);
    }
    let table = dir.path().join("t.csv");
    fs::write(&table, csv).unwrap();
    let model = dir.path().join("m.json");
    let o = qoe(&["train", "ols", "--input", p(&table), "--output", p(&model)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("singular"));
}

#[test]
fn gbm_train_is_deterministic_and_scores() {
    let dir = TempDir::new().unwrap();
    let table = training_table(&dir, 120);
    let run = |name: &str| {
        let model = dir.path().join(name);
        stdout(&qoe(&["train", "gbm", "--input", p(&table), "--n-estimators", "30", "--seed", "3", "--output", p(&model)]));
        fs::read(model).unwrap()
    };
    let a = run("a.json");
    assert_eq!(a, run("b.json"));
    let model = dir.path().join("a.json");
    let scores = stdout(&qoe(&["score", "--input", p(&table), "--model", p(&model)]));
    assert_eq!(scores.lines().count(), 121);
    let imp = stdout(&qoe(&["importance", "--model", p(&model)]));
    assert_eq!(imp.lines().next().unwrap(), "rank,feature,importance");
    let total: f64 = column(&imp, "importance").iter().map(|v| v.parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let eval = stdout(&qoe(&["eval", "--input", p(&table), "--model", p(&model)]));
    assert_eq!(column(&eval, "partition"), ["all"]);
}

#[test]
fn importance_of_single_split_model() {
    let dir = TempDir::new().unwrap();
    let model = r#"{
      "name": "stump",
      "columns": ["rebuffer_percentage", "initial_buffer_time_s", "si"],
      "scaler": {"min": [0, 0, 0], "max": [1, 1, 1]},
      "target": "logit",
      "ensemble": {
        "init_value": 0.0, "learning_rate": 0.1, "n_features": 3,
        "hyper": {"n_estimators": 1, "learning_rate": 0.1, "max_depth": 1, "min_samples_split": 2,
                  "min_samples_leaf": 1, "max_features": "all", "loss": "huber", "huber_quantile": 0.9,
                  "criterion": "friedman_mse"},
        "trees": [{"kind": "split", "feature": 1, "threshold": 0.5, "samples": 10, "impurity": 1.0,
                   "left": {"kind": "leaf", "value": -1.0, "samples": 5, "impurity": 0.0},
                   "right": {"kind": "leaf", "value": 1.0, "samples": 5, "impurity": 0.0}}]
      }
    }"#;
    let path = dir.path().join("stump.json");
    fs::write(&path, model).unwrap();
    let out = stdout(&qoe(&["importance", "--model", p(&path)]));
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows[0], "1,initial_buffer_time_s,1");
    assert!(rows[1..].iter().all(|r| r.ends_with(",0")));
}

#[test]
fn eval_with_split_labels() {
    let dir = TempDir::new().unwrap();
    let table = training_table(&dir, 60);
    let labels = dir.path().join("labels.csv");
    stdout(&qoe(&["split", "--input", p(&table), "--output", p(&labels)]));
    let model = dir.path().join("m.json");
    stdout(&qoe(&["train", "ols", "--input", p(&table), "--output", p(&model), "--report", p(&dir.path().join("r.csv"))]));
    let out = stdout(&qoe(&["eval", "--input", p(&table), "--model", p(&model), "--split", p(&labels)]));
    let parts = column(&out, "partition");
    assert_eq!(parts.len(), 3);
    for part in ["train", "test", "validate"] {
        assert!(parts.iter().any(|x| x == part));
    }
}
