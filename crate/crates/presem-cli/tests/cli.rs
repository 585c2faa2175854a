//! Exit codes, diagnostics, and output framing of the `presem` binary.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn repo_path(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
        .to_str()
        .unwrap()
        .to_string()
}

fn presem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_presem"))
        .args(args)
        .output()
        .expect("presem binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn check_accepts_every_bundled_scenario() {
    for entry in std::fs::read_dir(repo_path("scenarios")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("psm") {
            continue;
        }
        let out = presem(&["check", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", path.display());
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn check_reports_position_and_exits_2() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "scenario \"broken\"").unwrap();
    writeln!(file, "group a feature x").unwrap();
    writeln!(file, "link a -> missing : 1").unwrap();
    let out = presem(&["check", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("3:11"), "position missing in: {err}");
    assert!(err.contains("unknown-reference"), "kind missing in: {err}");
    assert!(err.contains("missing"), "offending name missing in: {err}");
}

#[test]
fn run_rejects_unknown_case() {
    let out = presem(&["run", &repo_path("scenarios/umbrella.psm"), "--case", "9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("9"));
}

#[test]
fn run_requires_a_case_when_several_exist() {
    let out = presem(&["run", &repo_path("scenarios/umbrella.psm")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("case"));
}

#[test]
fn run_order_flag_parses_both_forms() {
    let file = repo_path("scenarios/tree_felling.psm");
    let given = presem(&["run", &file, "--order", "given"]);
    assert_eq!(given.status.code(), Some(0));
    let permuted = presem(&["run", &file, "--order", "permute-index", "1"]);
    assert_eq!(permuted.status.code(), Some(0));
    assert_ne!(given.stdout, permuted.stdout, "index 1 must swap the fragments");

    let junk = presem(&["run", &file, "--order", "sideways"]);
    assert_eq!(junk.status.code(), Some(2));

    let out_of_range = presem(&["run", &file, "--order", "permute-index", "99"]);
    assert_eq!(out_of_range.status.code(), Some(3));
}

#[test]
fn run_writes_the_same_bytes_to_trace_and_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("out.json");
    let out = presem(&[
        "run",
        &repo_path("scenarios/tweety.psm"),
        "--case",
        "exception",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(out.stdout, std::fs::read(&trace).unwrap());
    let verdict: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(verdict["status"], "fails");
    assert_eq!(verdict["chosen"][0], "PenguinView");
}

#[test]
fn run_honours_theta_and_max_ticks() {
    // Raising the firing threshold above every weight silences the graph:
    // nothing beyond the clamped antecedent can fire, so the consequent
    // fails but evaluation still terminates.
    let out = presem(&[
        "run",
        &repo_path("scenarios/roar_tiger.psm"),
        "--theta",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let verdict: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(verdict["status"], "fails");

    let strict = presem(&[
        "run",
        &repo_path("scenarios/umbrella.psm"),
        "--case",
        "1",
        "--max-ticks",
        "1",
    ]);
    assert_eq!(strict.status.code(), Some(0));
    let verdict: Value = serde_json::from_slice(&strict.stdout).unwrap();
    assert_eq!(verdict["status"], "non-terminating");
}

#[test]
fn run_honours_d_max() {
    // By default only distance-0 pictures are admitted and case 2 settles
    // on the torn-umbrella picture. Widening the horizon to 1 admits the
    // calm-weather pictures, and the highest-scoring one flips the verdict.
    let out = presem(&[
        "run",
        &repo_path("scenarios/umbrella.psm"),
        "--case",
        "2",
        "--d-max",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let verdict: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(verdict["status"], "holds");
    assert_eq!(verdict["chosen"][0], "P2");
}

#[test]
fn paths_lists_the_amplifier_report() {
    let out = presem(&[
        "paths",
        &repo_path("scenarios/amplifier.psm"),
        "--from",
        "n1",
        "--to",
        "n4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let listing: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(listing["report"]["direct"], -1.0);
    assert_eq!(listing["report"]["indirect"], 2.0);
    assert_eq!(listing["report"]["total"], 1.0);
    assert_eq!(listing["paths"].as_array().unwrap().len(), 3);
    assert_eq!(listing["paths"][0]["nodes"][0], "n1");
}

#[test]
fn paths_rejects_unknown_groups() {
    let out = presem(&[
        "paths",
        &repo_path("scenarios/amplifier.psm"),
        "--from",
        "n1",
        "--to",
        "nowhere",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nowhere"));
}

#[test]
fn paths_max_len_truncates() {
    let out = presem(&[
        "paths",
        &repo_path("scenarios/amplifier.psm"),
        "--from",
        "n1",
        "--to",
        "n4",
        "--max-len",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let listing: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(listing["paths"].as_array().unwrap().len(), 1);
    assert_eq!(listing["report"]["total"], -1.0);
}

#[test]
fn learn_updates_weights_and_serializes() {
    let out = presem(&[
        "learn",
        &repo_path("scenarios/roar_tiger.psm"),
        "--episodes",
        &repo_path("scenarios/roar_tiger.episodes"),
        "--eta",
        "0.3",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        stderr(&out)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("link roar -> tiger : 1.1"), "got:\n{text}");
    assert!(text.contains("link tiger -> roar : 0.6"), "got:\n{text}");
}

#[test]
fn learn_out_writes_a_loadable_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let updated = dir.path().join("updated.psm");
    let out = presem(&[
        "learn",
        &repo_path("scenarios/roar_tiger.psm"),
        "--episodes",
        &repo_path("scenarios/roar_tiger.episodes"),
        "--out",
        updated.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let check = presem(&["check", updated.to_str().unwrap()]);
    assert_eq!(check.status.code(), Some(0));
    let text = std::fs::read_to_string(&updated).unwrap();
    assert!(text.contains("link roar -> tiger : 1.5"), "got:\n{text}");
}

#[test]
fn learn_rejects_unknown_episode_groups() {
    let mut episodes = tempfile::NamedTempFile::new().unwrap();
    writeln!(episodes, "co-active: roar, ghost").unwrap();
    let out = presem(&[
        "learn",
        &repo_path("scenarios/roar_tiger.psm"),
        "--episodes",
        episodes.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("ghost"));
}

#[test]
fn learn_reports_malformed_episode_lines() {
    let mut episodes = tempfile::NamedTempFile::new().unwrap();
    writeln!(episodes, "co-active: roar, tiger").unwrap();
    writeln!(episodes, "co-active roar tiger").unwrap();
    let out = presem(&[
        "learn",
        &repo_path("scenarios/roar_tiger.psm"),
        "--episodes",
        episodes.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("2:"), "line number missing: {}", stderr(&out));
}

#[test]
fn compare_orders_emits_the_agreement_flag() {
    let out = presem(&[
        "compare-orders",
        &repo_path("scenarios/tree_felling_conflict.psm"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"agree\": false"), "got:\n{text}");
    let report: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["orders"].as_array().unwrap().len(), 2);
}

#[test]
fn missing_file_is_an_input_error() {
    let out = presem(&["run", "/nonexistent/nope.psm"]);
    assert_eq!(out.status.code(), Some(2));
}
