use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fwdsc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fwdsc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn fwdsc")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn synth_block(dir: &Path) {
    let out = fwdsc(
        &["synth", "--kind", "block", "--n", "60", "--k", "3", "--noise", "0.2", "--seed", "7", "--out-dir", "d"],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_writes_matrix_truth_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    synth_block(tmp.path());
    assert!(tmp.path().join("d/matrix.csv").exists());
    let truth = std::fs::read_to_string(tmp.path().join("d/truth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 61);

    let out = fwdsc(&["synth", "--kind", "gauss", "--n", "100", "--noise", "0.2", "--out-dir", "g"], tmp.path());
    assert!(out.status.success());
    let manifest: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(manifest["subcommand"], "synth");
    assert_eq!(manifest["seed"], 0);
    assert!(tmp.path().join("g/features.csv").exists());
}

#[test]
fn cluster_is_deterministic_and_records_digests() {
    let tmp = tempfile::tempdir().unwrap();
    synth_block(tmp.path());
    let args = [
        "cluster", "--input", "d/matrix.csv", "--solver", "afw-v", "--max-clusters", "3",
        "--max-iters", "500", "--manifest", "m.json",
    ];
    let a = fwdsc(&args, tmp.path());
    let b = fwdsc(&args, tmp.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);

    let doc = json(&a);
    assert_eq!(doc["labels"].as_array().unwrap().len(), 60);
    assert_eq!(doc["k_found"], 3);

    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["flags"]["solver"]["solver"], "afw-v");
    assert_eq!(manifest["iterations"].as_array().unwrap().len(), 3);
}

#[test]
fn post_assign_labels_everything_and_csv_output() {
    let tmp = tempfile::tempdir().unwrap();
    synth_block(tmp.path());
    let out = fwdsc(
        &["cluster", "--input", "d/matrix.csv", "--solver", "pfw-b", "--max-clusters", "2", "--post-assign", "--output", "p.csv"],
        tmp.path(),
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(tmp.path().join("p.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("object,label"));
    assert!(lines.all(|l| !l.ends_with(",0")));
}

#[test]
fn trace_round_trips_through_trace_check() {
    let tmp = tempfile::tempdir().unwrap();
    synth_block(tmp.path());
    let out = fwdsc(
        &["cluster", "--input", "d/matrix.csv", "--solver", "fw", "--max-clusters", "2", "--trace", "t.csv"],
        tmp.path(),
    );
    assert!(out.status.success());
    let out = fwdsc(&["trace-check", "--trace", "t.csv", "--matrix", "d/matrix.csv", "--solver", "fw"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rounds = json(&out);
    let rounds = rounds.as_array().unwrap();
    assert_eq!(rounds.len(), 2);
    for r in rounds {
        assert!(r["identity_error"].is_null());
        assert_eq!(r["bound"]["drop_steps"], 0);
    }
}

#[test]
fn eval_scores_labels() {
    let tmp = tempfile::tempdir().unwrap();
    synth_block(tmp.path());
    let out = fwdsc(&["eval", "--pred", "d/truth.csv", "--truth", "d/truth.csv"], tmp.path());
    assert!(out.status.success());
    let doc = json(&out);
    assert_eq!(doc["ari"], 1.0);
    assert_eq!(doc["v_measure"], 1.0);
    assert_eq!(doc["assignment_rate"], 1.0);
}

#[test]
fn multistart_reports_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fwdsc(&["synth", "--kind", "gauss", "--n", "120", "--seed", "3", "--out-dir", "g"], tmp.path());
    assert!(out.status.success());
    let out = fwdsc(
        &["multistart", "--features", "g/features.csv", "--samples", "4", "--sampler", "dpp", "--max-clusters", "4", "--max-iters", "300"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    let passes = doc["passes"].as_u64().unwrap();
    assert!((1..=4).contains(&passes));
    assert_eq!(doc["log"].as_array().unwrap().len() as u64, passes);
}

#[test]
fn similarity_from_features() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("f.csv"), "x,y\n0,0\n3,4\n6,8\n").unwrap();
    let out = fwdsc(&["similarity", "--features", "f.csv", "--similarity", "minimax", "--output", "a.csv"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(tmp.path().join("a.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    // Bottleneck distances are all 5; the largest is 5, so every entry is 0.
    assert!(rows.iter().flatten().all(|&v| v == 0.0));

    let out = fwdsc(&["similarity", "--features", "f.csv", "--similarity", "euclidean-max", "--output", "b.csv"], tmp.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(tmp.path().join("b.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap().split(',').nth(1).unwrap().parse::<f64>().unwrap(), 5.0);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(fwdsc(&["cluster", "--bogus"], tmp.path()).status.code(), Some(1));
    assert_eq!(fwdsc(&["cluster"], tmp.path()).status.code(), Some(1));
    assert_eq!(fwdsc(&["cluster", "--input", "missing.csv"], tmp.path()).status.code(), Some(2));
    assert_eq!(fwdsc(&["cluster", "--input", "x.csv", "--solver", "nope"], tmp.path()).status.code(), Some(1));

    std::fs::write(tmp.path().join("neg.csv"), "0,-1\n-1,0\n").unwrap();
    let out = fwdsc(&["cluster", "--input", "neg.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("negative entry"));

    // A vertex start has f = 0, which replicator dynamics cannot leave.
    std::fs::write(tmp.path().join("z.csv"), "0,1,1\n1,0,1\n1,1,0\n").unwrap();
    let out = fwdsc(&["cluster", "--input", "z.csv", "--solver", "rd", "--init", "vertex"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("vertex starts are not viable"));
    let out = fwdsc(&["cluster", "--input", "z.csv", "--solver", "rd"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    std::fs::write(tmp.path().join("p.csv"), "1\n1\n").unwrap();
    std::fs::write(tmp.path().join("t.csv"), "1\n1\n2\n").unwrap();
    assert_eq!(fwdsc(&["eval", "--pred", "p.csv", "--truth", "t.csv"], tmp.path()).status.code(), Some(2));
}
