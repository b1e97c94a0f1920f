use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_treeplication"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn payload(len: usize) -> Vec<u8> {
    (0..len).map(|i| (i * 31 + 7) as u8).collect()
}

fn encode(dir: &Path, data: &[u8], k: u64) -> String {
    let input = dir.join("in.bin");
    let cw = dir.join("cw.trpl");
    fs::write(&input, data).unwrap();
    let out = run(&[
        "encode",
        input.to_str().unwrap(),
        "--k",
        &k.to_string(),
        "-o",
        cw.to_str().unwrap(),
    ]);
    json_of(&out);
    cw.to_str().unwrap().to_string()
}

#[test]
fn encode_decode_all_leaves() {
    let dir = tempfile::tempdir().unwrap();
    let data = payload(1001);
    let cw = encode(dir.path(), &data, 8);
    let back = dir.path().join("back.bin");
    let subset = (1..=8)
        .map(|j| format!("1:{j}"))
        .collect::<Vec<_>>()
        .join(",");
    let doc = json_of(&run(&[
        "decode",
        &cw,
        "--subset",
        &subset,
        "-o",
        back.to_str().unwrap(),
    ]));
    assert_eq!(fs::read(&back).unwrap(), data);
    assert_eq!(doc["result"]["xor_chains"], 0);
}

#[test]
fn decode_root_and_all_but_one_leaf() {
    let dir = tempfile::tempdir().unwrap();
    let data = payload(4096);
    let cw = encode(dir.path(), &data, 16);
    let manifest = dir.path().join("m.json");
    let mut pairs = vec![[5, 1]];
    pairs.extend((1..=16).filter(|&j| j != 9).map(|j| [1, j]));
    fs::write(&manifest, serde_json::to_string(&pairs).unwrap()).unwrap();
    let back = dir.path().join("back.bin");
    let doc = json_of(&run(&[
        "decode",
        &cw,
        "--manifest",
        manifest.to_str().unwrap(),
        "-o",
        back.to_str().unwrap(),
    ]));
    assert_eq!(fs::read(&back).unwrap(), data);
    assert_eq!(doc["result"]["xor_chains"], 1);
    assert_eq!(doc["result"]["fragments_communicated"], 15);
}

#[test]
fn too_few_fragments_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cw = encode(dir.path(), &payload(64), 4);
    let back = dir.path().join("back.bin");
    let out = run(&[
        "decode",
        &cw,
        "--subset",
        "3:1,1:1,2:2",
        "-o",
        back.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not decodable"));
    assert!(!back.exists());
}

#[test]
fn bad_header_and_usage_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk");
    fs::write(&junk, b"not a codeword").unwrap();
    let out = run(&[
        "decode",
        junk.to_str().unwrap(),
        "-o",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad codeword header"));

    assert_eq!(run(&["optimize", "--k", "8"]).status.code(), Some(1));
    assert_eq!(
        run(&["optimize", "--k", "6", "--n", "20"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["optimize", "--k", "8", "--n", "5"]).status.code(),
        Some(2)
    );
}

#[test]
fn missing_input_names_the_path() {
    let out = run(&[
        "encode",
        "/nonexistent/in.bin",
        "--k",
        "4",
        "-o",
        "/nonexistent/cw",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/in.bin"));
}

#[test]
fn optimize_reports_config_and_result() {
    let doc = json_of(&run(&["optimize", "--k", "8", "--n", "20"]));
    assert_eq!(doc["config"]["n"], 20);
    assert_eq!(doc["result"]["counts"], serde_json::json!([16, 2, 1, 1]));
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate",
        "--experiment",
        "cost",
        "--config",
        r#"{"mode":"layer-draw","counts":[8,2,2]}"#,
        "--trials",
        "2000",
        "--seed",
        "5",
    ];
    let a = run(&args);
    let b = bin().args(args).env("TRPL_THREADS", "1").output().unwrap();
    assert_eq!(json_of(&a), json_of(&b));
    assert_eq!(json_of(&a)["config"]["seed"], 5);
}

#[test]
fn report_csv_has_reference_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t4.csv");
    let out = run(&[
        "report",
        "--table",
        "table4",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("row,column,value,reference,tolerance,pass")
    );
    assert_eq!(
        text.lines()
            .filter(|l| l.contains(",analytic,") && l.ends_with(",true"))
            .count(),
        4
    );
}

#[test]
fn augment_and_health_round_out() {
    let ms = "[[1,0,2,1],[0,1],[1]]";
    let doc = json_of(&run(&[
        "augment",
        "--multiset",
        ms,
        "--policy",
        "sibling",
        "--z",
        "2:2",
    ]));
    assert_eq!(doc["result"]["new_vertex"], "2:1");
    let doc = json_of(&run(&["health", "--multiset", ms, "--l", "2"]));
    assert_eq!(doc["result"]["weight_profile"].as_array().unwrap().len(), 4);
    assert_eq!(
        run(&["health", "--multiset", ms, "--l", "9"]).status.code(),
        Some(2)
    );
}
