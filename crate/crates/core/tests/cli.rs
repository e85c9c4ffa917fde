use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn egocol(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egocol"))
        .args(args)
        .env("EGOCOL_OUT_ROOT", out_root)
        .output()
        .expect("spawn egocol")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn missing_manifest_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = egocol(&["prep", "--manifest", "no/such/manifest.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no/such/manifest.csv"), "{err}");
}

#[test]
fn malformed_scores_argument_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = egocol(
        &["eval", "--scores", "nameonly", "--manifest", "m.csv"],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("NAME=PATH"));
}

#[test]
fn default_output_dir_is_keyed_by_config() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    ok(&egocol(
        &["synth", "--ego-positives", "3", "--negatives", "3"],
        root,
    ));
    ok(&egocol(
        &["synth", "--ego-positives", "3", "--negatives", "3"],
        root,
    ));
    ok(&egocol(
        &["synth", "--ego-positives", "4", "--negatives", "3"],
        root,
    ));
    let mut names: Vec<String> = fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names.len(), 2, "{names:?}");
    assert!(names
        .iter()
        .all(|n| n.starts_with("synth-") && n.len() == "synth-".len() + 8));
}

#[test]
fn annotate_fcw_eval_report_chain() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    ok(&egocol(
        &[
            "synth",
            "--out",
            &p("syn"),
            "--ego-positives",
            "6",
            "--negatives",
            "6",
        ],
        root,
    ));
    ok(&egocol(
        &[
            "annotate",
            "--marks",
            &p("syn/marks.csv"),
            "--manifest",
            &p("syn/manifest.csv"),
            "--out",
            &p("ann"),
        ],
        root,
    ));
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("ann/reaction_stats.json")).unwrap())
            .unwrap();
    assert!(stats["median_s"].as_f64().unwrap() > 0.0);

    ok(&egocol(
        &[
            "fcw",
            "--detections",
            &p("syn/detections.jsonl"),
            "--out",
            &p("fcw"),
        ],
        root,
    ));
    ok(&egocol(
        &[
            "eval",
            "--scores",
            &format!("fcw={}", p("fcw/scores.csv")),
            "--manifest",
            &p("ann/manifest.csv"),
            "--split",
            "all",
            "--out",
            &p("ev"),
        ],
        root,
    ));
    let table = fs::read_to_string(root.join("ev/eval_table.csv")).unwrap();
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("method,dataset"));
    assert_eq!(lines.count(), 2, "one row per dataset:\n{table}");

    ok(&egocol(
        &[
            "report",
            "--eval",
            &p("ev/eval_report.json"),
            "--reaction-stats",
            &p("ann/reaction_stats.json"),
            "--out",
            &p("rep"),
        ],
        root,
    ));
    for f in [
        "metrics_long.csv",
        "tta_long.csv",
        "category_recall.csv",
        "reaction_cdf.csv",
        "run_meta.json",
    ] {
        assert!(root.join("rep").join(f).is_file(), "{f}");
    }
}
