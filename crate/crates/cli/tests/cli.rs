use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn pclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pclab")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(pclab(&["--bogus"]).status.code(), Some(2));
    assert_eq!(pclab(&["inv", "--degree", "x", "--genus", "0"]).status.code(), Some(2));
    assert_eq!(pclab(&["hyp"]).status.code(), Some(2));
}

#[test]
fn lines_in_the_plane() {
    let out = pclab(&["inv", "--ambient", "cp2", "--degree", "1", "--genus", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    let m = &v["measured"];
    assert_eq!(m["I_plus"], 3);
    assert_eq!(m["I_minus"], 0);
    assert_eq!(m["index"], 4);
    assert_eq!(m["envelope"]["verdict"], "FullExtension");
}

#[test]
fn lincx_identity_metric_gives_standard_structure() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_pclab"))
        .arg("lincx")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(br#"{"g": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}"#)
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let j: Vec<Vec<f64>> = serde_json::from_value(v["measured"]["J"].clone()).unwrap();
    let expect = [[0.0, -1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, -1.0], [0.0, 0.0, 1.0, 0.0]];
    for (row, e) in j.iter().zip(expect) {
        for (a, b) in row.iter().zip(e) {
            assert!((a - b).abs() < 1e-12, "{j:?}");
        }
    }
}

#[test]
fn corrupted_field_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = pclab(&["cg", "--op", "t", "--n", "32", "--output-dir", d]);
    assert_eq!(out.status.code(), Some(0));
    let path = dir.path().join("T.pclf");
    let good = path.to_str().unwrap();
    assert_eq!(pclab(&["cg", "--op", "dbar", "--input", good]).status.code(), Some(0));

    let mut bytes = std::fs::read(&path).unwrap();
    let k = bytes.len() - 9;
    bytes[k] ^= 0x40;
    let bad = dir.path().join("bad.pclf");
    std::fs::write(&bad, bytes).unwrap();
    let out = pclab(&["cg", "--op", "dbar", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}

#[test]
fn bubble_demo_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = pclab(&["bubble", "--n", "4,8,16", "--grid", "128", "--output-dir", d]);
    assert_eq!(out.status.code(), Some(0));
    for name in ["energy_partition.csv", "neck_profile.csv", "concentration_report.json", "graph.dot"] {
        assert!(Path::new(d).join(name).exists(), "{name}");
    }
    let v = json(&out);
    assert_eq!(v["measured"]["concentration_report"]["points"].as_array().unwrap().len(), 1);
}

#[test]
fn decay_probe_is_seed_deterministic() {
    let a = pclab(&["--seed", "7", "hyp", "--decay"]);
    let b = pclab(&["--seed", "7", "hyp", "--decay"]);
    let c = pclab(&["--seed", "8", "hyp", "--decay"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(json(&a)["measured"], json(&c)["measured"]);
}

#[test]
fn fast_suite_is_deterministic() {
    let a = pclab(&["--seed", "3", "suite", "fast"]);
    let b = pclab(&["--seed", "3", "suite", "fast"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["checks"].as_array().unwrap().len(), 11);
}
