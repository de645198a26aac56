use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_screenparse"));
    c.env_remove("SCREENPARSE_WORKERS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn manifest(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn corpus(dir: &Path, noise: &str) {
    ok(dir, &["synth", "corpus.jsonl", "--seed", "7", "--count", "40", "--noise", noise]);
}

#[test]
fn convert_round_trip_is_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    corpus(p, "duplicates,tiny");
    ok(p, &["convert", "corpus.jsonl", "a.st"]);
    ok(p, &["convert", "a.st", "a.jsonl"]);
    ok(p, &["convert", "a.jsonl", "b.st"]);
    ok(p, &["convert", "b.st", "b.jsonl"]);
    assert_eq!(fs::read(p.join("a.st")).unwrap(), fs::read(p.join("b.st")).unwrap());
    assert_eq!(fs::read(p.join("a.jsonl")).unwrap(), fs::read(p.join("b.jsonl")).unwrap());
    assert_eq!(manifest(p.join("b.st.manifest.json"))["counts"]["pages"], 40);
}

#[test]
fn convert_reports_malformed_markup_offset() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(p.join("bad.st"), "ok\t<text><loc_0><loc_0><loc_9><loc_9>hi</text>\nbad\t<text><loc_0></button>\n").unwrap();
    let out = run(p, &["convert", "bad.st", "out.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("offset"), "{err}");
}

#[test]
fn evaluate_against_self_is_perfect() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    corpus(p, "none");
    for agg in ["macro", "micro"] {
        let out = ok(p, &["evaluate", "corpus.jsonl", "corpus.jsonl", "--aggregation", agg, "--per-image", "pi.csv"]);
        let report: Value = serde_json::from_slice(&out.stdout).unwrap();
        for (k, v) in report.as_object().unwrap() {
            assert_eq!(v.as_f64(), Some(1.0), "{agg} {k}");
        }
    }
    let csv = fs::read_to_string(p.join("pi.csv")).unwrap();
    assert_eq!(csv.lines().count(), 41);

    let out = ok(p, &["evaluate", "corpus.jsonl", "corpus.jsonl", "--metrics", "page_iou,map_at_50"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["page_iou"], 1.0);
    assert!(report["pix_cov"].is_null());
}

#[test]
fn evaluate_detects_degradation() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    corpus(p, "none");
    ok(p, &["perturb", "corpus.jsonl", "relabel.jsonl", "--kind", "relabel", "--magnitude", "1"]);
    let out = ok(p, &["evaluate", "relabel.jsonl", "corpus.jsonl"]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["page_iou"], 1.0);
    assert_eq!(r["label_page_iou"], 0.0);
    assert_eq!(r["map_at_50"], 0.0);
}

#[test]
fn filter_on_clean_corpus_removes_nothing() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    corpus(p, "none");
    ok(p, &["filter", "corpus.jsonl", "out.jsonl"]);
    let m = manifest(p.join("out.jsonl.manifest.json"));
    assert_eq!(m["counts"]["removed_elements"], 0);
    assert_eq!(m["counts"]["removed_pages"], 0);
    assert_eq!(m["counts"]["pages_out"], 40);
    assert!(m["config_hash"].as_str().unwrap().starts_with("sha256:"));
    assert_eq!(m["stage_versions"].as_object().unwrap().len(), 6);
    assert_eq!(fs::read(p.join("corpus.jsonl")).unwrap(), fs::read(p.join("out.jsonl")).unwrap());
}

#[test]
fn filter_is_deterministic_across_worker_counts() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    corpus(p, "all");
    ok(p, &["--workers", "1", "filter", "corpus.jsonl", "one.jsonl", "--batch-size", "7", "--dropped", "d1.jsonl"]);
    let out = bin()
        .current_dir(p)
        .env("SCREENPARSE_WORKERS", "4")
        .args(["filter", "corpus.jsonl", "four.jsonl", "--dropped", "d4.jsonl"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(p.join("one.jsonl")).unwrap(), fs::read(p.join("four.jsonl")).unwrap());
    assert_eq!(fs::read(p.join("d1.jsonl")).unwrap(), fs::read(p.join("d4.jsonl")).unwrap());
    let (a, b) = (manifest(p.join("one.jsonl.manifest.json")), manifest(p.join("four.jsonl.manifest.json")));
    assert_eq!(a["config_hash"], b["config_hash"]);
    assert_eq!(a["counts"], b["counts"]);
    assert!(a["counts"]["removed_elements"].as_u64().unwrap() > 0);

    // second pass over the survivors removes nothing
    ok(p, &["filter", "one.jsonl", "again.jsonl"]);
    assert_eq!(manifest(p.join("again.jsonl.manifest.json"))["counts"]["removed_elements"], 0);
}

#[test]
fn filter_flags_and_config_override_defaults() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    corpus(p, "none");
    fs::write(p.join("cfg.toml"), "[filter]\njudge_threshold = 0.99\n").unwrap();
    ok(p, &["filter", "corpus.jsonl", "a.jsonl", "--config", "cfg.toml"]);
    let a = manifest(p.join("a.jsonl.manifest.json"));
    assert_eq!(a["config"]["filter"]["judge_threshold"], 0.99);
    assert!(a["counts"]["removed_pages"].as_u64().unwrap() > 0);
    ok(p, &["filter", "corpus.jsonl", "b.jsonl", "--config", "cfg.toml", "--judge-threshold", "0.5"]);
    let b = manifest(p.join("b.jsonl.manifest.json"));
    assert_eq!(b["counts"]["removed_pages"], 0);
    assert_ne!(a["config_hash"], b["config_hash"]);
    ok(p, &["filter", "corpus.jsonl", "c.jsonl", "--judge", "constant:0.69"]);
    assert_eq!(manifest(p.join("c.jsonl.manifest.json"))["counts"]["pages_out"], 0);
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    assert_eq!(run(p, &["--help"]).status.code(), Some(0));
    assert_eq!(run(p, &["--version"]).status.code(), Some(0));
    assert_eq!(run(p, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(p, &["filter"]).status.code(), Some(1));
    corpus(p, "none");
    assert_eq!(run(p, &["filter", "corpus.jsonl", "o.jsonl", "--dup-iou", "1.5"]).status.code(), Some(1));
    assert_eq!(run(p, &["filter", "corpus.jsonl", "o.jsonl", "--judge", "psychic"]).status.code(), Some(1));
    assert_eq!(run(p, &["evaluate", "corpus.jsonl", "corpus.jsonl", "--labels", "coco"]).status.code(), Some(1));
    assert_eq!(run(p, &["filter", "missing.jsonl", "o.jsonl"]).status.code(), Some(2));
    fs::write(p.join("broken.jsonl"), "{\"page_id\": 1}\n").unwrap();
    assert_eq!(run(p, &["filter", "broken.jsonl", "o.jsonl"]).status.code(), Some(2));
    // ground truth in the two-label space cannot hold screentag class names
    assert_eq!(run(p, &["evaluate", "corpus.jsonl", "corpus.jsonl", "--labels", "screenspot2"]).status.code(), Some(2));
}

#[cfg(unix)]
#[test]
fn failing_external_judge_exits_3_after_applying_policy() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    corpus(p, "none");
    let keep = run(p, &["filter", "corpus.jsonl", "keep.jsonl", "--judge", "exec:false"]);
    assert_eq!(keep.status.code(), Some(3));
    assert_eq!(manifest(p.join("keep.jsonl.manifest.json"))["counts"]["pages_out"], 40);
    let drop = run(p, &["filter", "corpus.jsonl", "drop.jsonl", "--judge", "exec:false", "--on-judge-error", "drop"]);
    assert_eq!(drop.status.code(), Some(3));
    assert_eq!(manifest(p.join("drop.jsonl.manifest.json"))["counts"]["pages_out"], 0);

    fs::write(p.join("judge.sh"), "#!/bin/sh\ncat > /dev/null\necho '{\"overall_quality\": 90}'\n").unwrap();
    let out = run(p, &["filter", "corpus.jsonl", "ext.jsonl", "--judge", "exec:sh judge.sh"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(manifest(p.join("ext.jsonl.manifest.json"))["counts"]["pages_out"], 40);
}

#[test]
fn synth_writes_injection_log() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    corpus(p, "all");
    let log = fs::read_to_string(p.join("corpus.jsonl.injections.jsonl")).unwrap();
    let m = manifest(p.join("corpus.jsonl.manifest.json"));
    assert_eq!(m["counts"]["injections"].as_u64().unwrap() as usize, log.lines().count());
    assert!(log.lines().count() > 0);
    let first = fs::read(p.join("corpus.jsonl")).unwrap();
    ok(p, &["synth", "corpus.jsonl", "--seed", "7", "--count", "40", "--noise", "all"]);
    assert_eq!(first, fs::read(p.join("corpus.jsonl")).unwrap());
}

#[test]
fn vocab_and_loss() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    let out = ok(p, &["vocab"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 613);
    assert!(text.lines().any(|l| l == "<date_time_picker>"));
    assert!(text.lines().any(|l| l == "<loc_500>"));

    let lp = "-0.6931471805599453";
    fs::write(p.join("s.tsv"), format!("<button>\t{lp}\n<loc_250>\t{lp}\nSign\t{lp}\n in\t{lp}\n")).unwrap();
    let out = ok(p, &["loss", "s.tsv", "--weights"]);
    let line: Value = serde_json::from_slice(&out.stdout).unwrap();
    let want = 6.0 * std::f64::consts::LN_2;
    assert!((line["sum"].as_f64().unwrap() - want).abs() < 1e-12);
    assert_eq!(line["weights"], serde_json::json!([2.0, 2.0, 1.0, 1.0]));
    let out = ok(p, &["loss", "s.tsv", "--lambda-tag", "1", "--lambda-loc", "1"]);
    let line: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((line["sum"].as_f64().unwrap() - 4.0 * std::f64::consts::LN_2).abs() < 1e-12);
    assert_eq!(run(p, &["loss", "s.tsv", "--lambda-tag", "0"]).status.code(), Some(1));
}

#[test]
fn overlay_renders_requested_page() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    corpus(p, "none");
    ok(p, &["overlay", "corpus.jsonl", "--page-id", "synth-7-000003", "o.svg"]);
    let svg = fs::read_to_string(p.join("o.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("<title>synth-7-000003</title>"));
    assert_eq!(run(p, &["overlay", "corpus.jsonl", "--page-id", "nope", "x.svg"]).status.code(), Some(2));
}
