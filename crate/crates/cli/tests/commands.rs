use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn rsf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsf"))
        .args(args)
        .env_remove("RSF_LOG")
        .output()
        .expect("spawn rsf")
}

fn ok(args: &[&str]) -> Output {
    let out = rsf(args);
    assert!(
        out.status.success(),
        "rsf {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic dataset in `dir/name`, returning the manifest path.
fn small_dataset(dir: &Path, name: &str, mode: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec![
        "generate", "--mode", mode, "--seed", "3", "--n-examples", "40", "--mean-length", "6",
        "--out",
    ];
    args.push(s(&out));
    args.extend_from_slice(extra);
    ok(&args);
    out.join("manifest.json")
}

#[test]
fn generate_then_cv_reports_every_fold() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "order", "order", &[]);
    let report = dir.path().join("report.json");
    let out = ok(&["cv", "--data", s(&data), "--trees", "5", "--out", s(&report)]);
    let json: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["fold_results"].as_array().unwrap().len(), 20);
    assert_eq!(json["name"], "order");
    assert_eq!(json["positive_class"], "1");
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("order"), "{table}");
}

#[test]
fn cv_without_out_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "d", "lengths", &[]);
    let out = ok(&["cv", "--data", s(&data), "--trees", "3", "--reps", "2", "--folds", "3", "--name", "x"]);
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["fold_results"].as_array().unwrap().len(), 6);
    assert_eq!(json["name"], "x");
    assert_eq!(json["seed"], 42);
}

#[test]
fn generate_records_its_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "d", "items", &[]);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(&data).unwrap()).unwrap();
    assert_eq!(manifest["meta"]["generator"]["seed"], 3);
    assert_eq!(manifest["meta"]["generator"]["mode"], "items");
    assert_eq!(manifest["columns"][0]["kind"], "setseq");
    assert_eq!(manifest["columns"][0]["measure"], "editjaccard");
}

#[test]
fn fit_and_predict_write_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "d", "lengths", &[]);
    let model = dir.path().join("model.json");
    let preds = dir.path().join("preds.csv");
    ok(&["fit", "--data", s(&data), "--out", s(&model), "--trees", "4", "--seed", "9"]);
    let json: Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(json["version"], 1);
    assert_eq!(json["hyperparams"]["seed"], 9);
    assert_eq!(json["trees"].as_array().unwrap().len(), 4);

    ok(&["predict", "--model", s(&model), "--data", s(&data), "--out", s(&preds)]);
    let text = fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "example_index,p_negative,p_positive,predicted");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 40);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], i.to_string());
        let (n, p): (f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap());
        assert!((n + p - 1.0).abs() < 1e-12);
        assert_eq!(row[3], if p > n { "1" } else { "0" });
    }
}

#[test]
fn bag_of_items_model_scores_raw_sequences() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "d", "items", &[]);
    let other = dir.path().join("other");
    ok(&["generate", "--mode", "items", "--seed", "8", "--n-examples", "10", "--mean-length", "3", "--out", s(&other)]);
    let model = dir.path().join("model.json");
    let preds = dir.path().join("preds.csv");
    ok(&["fit", "--data", s(&data), "--out", s(&model), "--trees", "3", "--bag-of-items"]);
    let json: Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert!(json["columns"].as_array().unwrap().len() > 1);
    ok(&["predict", "--model", s(&model), "--data", s(&other.join("manifest.json")), "--out", s(&preds)]);
    assert_eq!(fs::read_to_string(&preds).unwrap().lines().count(), 11);
}

#[test]
fn outputs_repeat_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_dataset(dir.path(), "a", "order", &[]);
    let b = small_dataset(dir.path(), "b", "order", &[]);
    for file in ["manifest.json", "labels.csv", "000_seq.jsonl"] {
        let (x, y) = (a.with_file_name(file), b.with_file_name(file));
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{file}");
    }
    let run = |tag: &str, workers: &str| {
        let model = dir.path().join(format!("model_{tag}.json"));
        ok(&["fit", "--data", s(&a), "--out", s(&model), "--trees", "6", "--workers", workers]);
        fs::read(model).unwrap()
    };
    let one = run("a", "1");
    assert_eq!(one, run("b", "1"));
    assert_eq!(one, run("c", "8"));

    let cv = |tag: &str| {
        let report = dir.path().join(format!("cv_{tag}.json"));
        ok(&["cv", "--data", s(&a), "--trees", "3", "--reps", "2", "--out", s(&report)]);
        fs::read(report).unwrap()
    };
    assert_eq!(cv("a"), cv("b"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "d", "order", &[]);
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"data": "d/manifest.json", "trees": 2, "max_features": 1, "seed": 5}"#).unwrap();
    let model = dir.path().join("model.json");
    ok(&["fit", "--config", s(&config), "--out", s(&model), "--seed", "6"]);
    let json: Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(json["trees"].as_array().unwrap().len(), 2);
    assert_eq!(json["hyperparams"]["seed"], 6);
    assert_eq!(json["hyperparams"]["max_features"], serde_json::json!({"count": 1}));
    assert!(data.exists());
}

#[test]
fn inputs_are_left_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "d", "order", &[]);
    let snapshot = |p: &Path| -> Vec<(PathBuf, Vec<u8>)> {
        let mut files: Vec<_> = fs::read_dir(p)
            .unwrap()
            .map(|e| {
                let path = e.unwrap().path();
                let bytes = fs::read(&path).unwrap();
                (path, bytes)
            })
            .collect();
        files.sort();
        files
    };
    let before = snapshot(data.parent().unwrap());
    let model = dir.path().join("model.json");
    ok(&["fit", "--data", s(&data), "--out", s(&model), "--trees", "2"]);
    ok(&["predict", "--model", s(&model), "--data", s(&data), "--out", s(&dir.path().join("p.csv"))]);
    ok(&["cv", "--data", s(&data), "--trees", "2", "--reps", "1"]);
    assert_eq!(snapshot(data.parent().unwrap()), before);
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        vec!["fit", "--out", "m.json"],
        vec!["frobnicate"],
        vec!["generate", "--mode", "zigzag", "--out", "x"],
        vec!["fit", "--data", "d.json", "--out", "m.json", "--max-features", "lots"],
        vec!["cv", "--data", "d.json", "--trees", "many"],
    ] {
        let out = rsf(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(rsf(&["--help"]).status.code(), Some(0));
    assert_eq!(rsf(&["--version"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere/manifest.json");
    let out = rsf(&["fit", "--data", s(&missing), "--out", s(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));

    let bad_model = dir.path().join("bad.json");
    fs::write(&bad_model, "{\"version\": 99}").unwrap();
    let data = small_dataset(dir.path(), "d", "order", &[]);
    let out = rsf(&["predict", "--model", s(&bad_model), "--data", s(&data), "--out", s(&dir.path().join("p.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_hyperparameters_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "d", "order", &[]);
    let out = rsf(&["fit", "--data", s(&data), "--out", s(&dir.path().join("m.json")), "--max-features", "7"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}
