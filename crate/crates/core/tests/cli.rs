// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn modalprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modalprobe"))
        .args(args)
        .env("MODALPROBE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = modalprobe(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", dir.to_str().unwrap(), "--per-category", "40"];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = modalprobe(&["frobnicate"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn missing_input_reports_error_code() {
    let dir = tempfile::tempdir().unwrap();
    let nowhere = dir.path().join("nope");
    let out = modalprobe(&[
        "cv",
        "--archive",
        nowhere.to_str().unwrap(),
        "--stimuli",
        nowhere.join("stimuli.csv").to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[E_IO]: "), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn classify_ranks_diffvec_above_random() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, &["--reference-pair", "probable:impossible", "--reference-size", "500"]);
    let out = dir.path().join("classify");
    ok(&[
        "classify",
        "--archive",
        data.join("archive").to_str().unwrap(),
        "--stimuli",
        data.join("stimuli.csv").to_str().unwrap(),
        "--reference",
        data.join("reference").to_str().unwrap(),
        "--pair",
        "probable:impossible",
        "--out",
        out.to_str().unwrap(),
    ]);
    let results = read_json(&out.join("classify.json"));
    let acc = |m: &str| {
        results
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["method"] == m)
            .unwrap_or_else(|| panic!("no {m} row"))["accuracy"]
            .as_f64()
            .unwrap()
    };
    assert_eq!(acc("diffvec"), 1.0);
    assert!(acc("diffvec") > acc("random"));
    assert!(acc("pc") >= acc("random"));
    assert!(out.join("classify.csv").exists() && out.join("classify.svg").exists());
    assert!(out.join("reference_pcs").exists());

    let manifest = read_json(&out.join("run_manifest.json"));
    assert_eq!(manifest["tool"], "modalprobe");
    assert_eq!(manifest["threads"], 2);
    assert_eq!(manifest["config"]["subcommand"], "classify");
}

#[test]
fn human_recovers_planted_generator() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, &["--human"]);
    let out = dir.path().join("human");
    ok(&[
        "human",
        "--archive",
        data.join("archive").to_str().unwrap(),
        "--stimuli",
        data.join("stimuli.csv").to_str().unwrap(),
        "--responses",
        data.join("responses.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let metrics = read_json(&out.join("metrics.json"));
    let r = metrics["pearson_nminus1"].as_f64().unwrap();
    assert!(r >= 0.99, "pearson_nminus1 {r}");
    assert!(out.join("predictions.csv").exists());
}

#[test]
fn cv_and_interpret_on_synth() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, &["--human"]);
    let (archive, stimuli) = (data.join("archive"), data.join("stimuli.csv"));
    let cv = dir.path().join("cv");
    ok(&[
        "cv",
        "--archive",
        archive.to_str().unwrap(),
        "--stimuli",
        stimuli.to_str().unwrap(),
        "--out",
        cv.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(cv.join("cv.csv")).unwrap();
    assert!(text.lines().count() > 1);

    let interp = dir.path().join("interpret");
    ok(&[
        "interpret",
        "--archive",
        archive.to_str().unwrap(),
        "--stimuli",
        stimuli.to_str().unwrap(),
        "--ratings",
        data.join("ratings.csv").to_str().unwrap(),
        "--out",
        interp.to_str().unwrap(),
    ]);
    let grid = read_json(&interp.join("grid.json"));
    let rows: Vec<&str> = grid["rows"].as_array().unwrap().iter().map(|r| r.as_str().unwrap()).collect();
    let cols: Vec<&str> = grid["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    let r = rows.iter().position(|r| r.contains("probable") && r.contains("improbable")).unwrap();
    let c = cols.iter().position(|c| *c == "event_likelihood").unwrap();
    let u = cols.iter().position(|c| *c == "unrelated").unwrap();
    let cell = |j: usize| grid["cells"][r][j]["value"].as_f64().unwrap();
    assert!(cell(c) > 0.9, "{}", cell(c));
    assert!(cell(u) < cell(c));
}
