use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scriptalign"))
        .args(args)
        .current_dir(dir)
        .env_remove("SCRIPTALIGN_LOG")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let none = run(dir.path(), &[]);
    assert_eq!(none.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&none.stderr).contains("Usage"));
    assert_eq!(
        run(dir.path(), &["align", "--nonsense"]).status.code(),
        Some(2)
    );
    assert_eq!(run(dir.path(), &["teleport"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "align",
            "--left",
            "missing.csv",
            "--right",
            "missing.csv",
            "--scorer",
            "oracle:0",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("missing.csv"));
}

#[test]
fn every_subcommand_documents_defaults() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["synth", "dataset", "train", "eval", "align", "assign"] {
        let out = ok(dir.path(), &[sub, "--help"]);
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("[default:"), "{sub} help lacks defaults");
        assert!(text.contains("--config"), "{sub} help lacks --config");
    }
}

fn key(op: &Value) -> (String, Option<(u64, u64)>, Option<(u64, u64)>) {
    let side = |v: &Value| {
        v.as_object()
            .map(|o| (o["line"].as_u64().unwrap(), o["position"].as_u64().unwrap()))
    };
    (
        op["kind"].as_str().unwrap().to_string(),
        side(&op["left"]),
        side(&op["right"]),
    )
}

#[test]
fn synthetic_pair_aligns_exactly_with_noise_free_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "--mode",
            "pair",
            "--out",
            "pair",
            "--lines",
            "4",
            "--seed",
            "3",
            "--no-images",
        ],
    );
    let args = [
        "align",
        "--left",
        "pair/left/manifest.csv",
        "--right",
        "pair/right/manifest.csv",
        "--scorer",
        "oracle:0",
        "--min-window",
        "5",
        "--output",
        "ops.json",
        "--tsv",
        "ops.tsv",
    ];
    ok(d, &args);
    let ops: Vec<Value> =
        serde_json::from_str(&fs::read_to_string(d.join("ops.json")).unwrap()).unwrap();
    let truth: Vec<Vec<Value>> =
        serde_json::from_str(&fs::read_to_string(d.join("pair/truth.json")).unwrap()).unwrap();
    let expected: HashSet<_> = truth
        .iter()
        .enumerate()
        .flat_map(|(line, ops)| {
            ops.iter().map(move |o| {
                let pos = |v: &Value| v.as_u64().map(|p| (line as u64, p));
                let kind = o["kind"].as_str().unwrap().to_string();
                (kind, pos(&o["left_pos"]), pos(&o["right_pos"]))
            })
        })
        .collect();
    let got: HashSet<_> = ops.iter().map(key).collect();
    assert_eq!(got, expected);
    let tsv = fs::read_to_string(d.join("ops.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), ops.len() + 1);

    // Same flags, same bytes.
    let first = fs::read(d.join("ops.json")).unwrap();
    ok(d, &args);
    assert_eq!(fs::read(d.join("ops.json")).unwrap(), first);
}

#[test]
fn html_report_embeds_images() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "--mode",
            "pair",
            "--out",
            "p",
            "--lines",
            "1",
            "--min-tokens",
            "6",
            "--max-tokens",
            "8",
            "--canvas",
            "23x19",
        ],
    );
    ok(
        d,
        &[
            "align",
            "--left",
            "p/left/manifest.csv",
            "--right",
            "p/right/manifest.csv",
            "--scorer",
            "oracle:0",
            "--canvas",
            "23x19",
            "--output",
            "-",
            "--html",
            "report.html",
        ],
    );
    let html = fs::read_to_string(d.join("report.html")).unwrap();
    assert!(html.contains("data:image/png;base64,"));
}

#[test]
fn cross_validation_on_seven_manuscripts_gives_21_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "--out",
            "c",
            "--forms",
            "6",
            "--occurrences",
            "2",
            "--tokens-per-line",
            "6",
            "--canvas",
            "23x19",
        ],
    );
    ok(
        d,
        &[
            "eval",
            "--cross-validation",
            "--corpus",
            "c/manifest.csv",
            "--scorer",
            "oracle:0.1",
            "--out",
            "cv.csv",
            "--summary",
            "cv.json",
            "--workers",
            "2",
        ],
    );
    let csv = fs::read_to_string(d.join("cv.csv")).unwrap();
    let rows: Vec<&str> = csv
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with("mean"))
        .collect();
    assert_eq!(rows.len(), 21);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(d.join("cv.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"].as_array().unwrap().len(), 21);
    assert!(summary["config_fingerprint"].is_string());
}

#[test]
fn dataset_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "--out",
            "c",
            "--manuscripts",
            "4",
            "--forms",
            "5",
            "--occurrences",
            "2",
            "--canvas",
            "23x19",
        ],
    );
    ok(
        d,
        &[
            "dataset",
            "--corpus",
            "c/manifest.csv",
            "--out",
            "b",
            "--heldout",
            "ms0,ms1",
            "--seed",
            "2",
        ],
    );
    let model = [
        "--canvas",
        "23x19",
        "--arch",
        "reduced",
        "--multiplier",
        "0.0625",
        "--epochs",
        "2",
        "--fan-in-init",
        "--seed",
        "4",
    ];
    let mut train = vec!["train", "--bundle", "b", "--out", "m.bin"];
    train.extend(model);
    ok(d, &train);
    let sidecar: Value =
        serde_json::from_str(&fs::read_to_string(d.join("m.bin.json")).unwrap()).unwrap();
    assert_eq!(sidecar["train"]["seed"], 4);
    assert_eq!(sidecar["report"]["epochs"].as_array().unwrap().len(), 2);

    let out = ok(d, &["eval", "--bundle", "b", "--scorer", "siamese:m.bin"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let acc = report["test_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    // Retraining from the same flags reproduces the checkpoint.
    let first = fs::read(d.join("m.bin")).unwrap();
    ok(d, &train);
    assert_eq!(fs::read(d.join("m.bin")).unwrap(), first);

    // All splits at once.
    let out = ok(
        d,
        &["dataset", "--corpus", "c/manifest.csv", "--out", "all"],
    );
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 6);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("m.csv"), "0.1,0.9\n0.8,0.2\n").unwrap();
    fs::write(d.join("run.ini"), "[assign]\nmatrix = m.csv\n").unwrap();
    let out = ok(d, &["--config", "run.ini", "assign"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["total_score"].as_f64().unwrap() - 1.7).abs() < 1e-12);
    assert_eq!(v["inversions"], 1);

    fs::write(d.join("n.csv"), "1,0\n0,1\n").unwrap();
    let out = ok(d, &["--config", "run.ini", "assign", "--matrix", "n.csv"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["total_score"].as_f64().unwrap(), 2.0);
    assert_eq!(v["inversions"], 0);

    fs::write(d.join("bad.ini"), "[assign]\nwindow = 3\n").unwrap();
    assert_eq!(
        run(d, &["--config", "bad.ini", "assign"]).status.code(),
        Some(2)
    );
}
