use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use regex::Regex;
use tempfile::TempDir;

use gverify_core::factor::FactoredTree;
use gverify_core::kb::sample_kb_path;

fn gverify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gverify"))
        .args(args)
        .env_remove("GVERIFY_JOBS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn sample() -> String {
    sample_kb_path().display().to_string()
}

fn pipeline(dir: &Path) -> Output {
    gverify(&["pipeline", &sample(), "--out", dir.to_str().unwrap()])
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn sample_text() -> String {
    fs::read_to_string(sample_kb_path()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_on_sample_exits_zero_and_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let out = pipeline(dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "vectors.csv",
        "tree.json",
        "tree.dot",
        "tree.txt",
        "report.json",
    ] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
}

#[test]
fn validate_exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&gverify(&["validate", &sample()])), 0);

    // Dropping a rule leaves vectors uncovered.
    let text = sample_text();
    let start = text.find("  rule untreated_at_target_early {").unwrap();
    let end = start
        + text[start..]
            .find("  rule untreated_at_target_late")
            .unwrap();
    let gap = write(
        &dir,
        "gap.kb",
        &format!("{}{}", &text[..start], &text[end..]),
    );
    let out = gverify(&["validate", s(&gap)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("gap"));

    let gap_out = dir.path().join("out");
    assert_eq!(
        code(&gverify(&["pipeline", s(&gap), "--out", s(&gap_out)])),
        2
    );
    assert!(!gap_out.exists(), "invalid KB must not produce outputs");

    let broken = write(&dir, "broken.kb", "kb \"x\" { variable a { }");
    assert_eq!(code(&gverify(&["validate", s(&broken)])), 3);
    assert_eq!(code(&gverify(&["validate", "/nonexistent/kb.kb"])), 3);
}

#[test]
fn verify_detects_a_mutated_rule() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&pipeline(dir.path())), 0);
    let tree = dir.path().join("tree.json");

    assert_eq!(
        code(&gverify(&["verify", &sample(), "--tree", s(&tree)])),
        0
    );

    let mutated = sample_text().replace(
        "first { diet_glinide ^+ diet_metformin_glinide }",
        "first { diet_glinide ^+ }",
    );
    assert_ne!(mutated, sample_text());
    let kb = write(&dir, "mutated.kb", &mutated);
    let report = dir.path().join("report.json");
    let out = gverify(&["verify", s(&kb), "--tree", s(&tree), "--report", s(&report)]);
    assert_eq!(code(&out), 1);
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(doc["divergences"].as_u64().unwrap() > 0);
    assert!(!doc["witnesses"].as_array().unwrap().is_empty());
}

#[test]
fn staged_commands_reproduce_the_pipeline() {
    let dir = TempDir::new().unwrap();
    let p = |n: &str| dir.path().join(n);
    assert_eq!(code(&pipeline(&p("full"))), 0);

    assert_eq!(
        code(&gverify(&["label", &sample(), "--out", s(&p("v.csv"))])),
        0
    );
    assert_eq!(
        fs::read(p("v.csv")).unwrap(),
        fs::read(p("full/vectors.csv")).unwrap()
    );
    assert_eq!(
        code(&gverify(&[
            "learn",
            &sample(),
            "--vectors",
            s(&p("v.csv")),
            "--out",
            s(&p("raw.json"))
        ])),
        0
    );
    assert_eq!(
        code(&gverify(&[
            "factorize",
            &sample(),
            "--tree",
            s(&p("raw.json")),
            "--out",
            s(&p("t.json"))
        ])),
        0
    );
    assert_eq!(
        fs::read(p("t.json")).unwrap(),
        fs::read(p("full/tree.json")).unwrap()
    );
    assert_eq!(
        code(&gverify(&[
            "diff",
            s(&p("t.json")),
            s(&p("full/tree.json"))
        ])),
        0
    );
    assert_eq!(
        code(&gverify(&["diff", s(&p("raw.json")), s(&p("t.json"))])),
        1
    );

    for (fmt, file) in [
        ("text", "tree.txt"),
        ("dot", "tree.dot"),
        ("json", "tree.json"),
    ] {
        let out = p(&format!("r.{fmt}"));
        assert_eq!(
            code(&gverify(&[
                "render",
                s(&p("t.json")),
                "--format",
                fmt,
                "--out",
                s(&out)
            ])),
            0
        );
        assert_eq!(
            fs::read(&out).unwrap(),
            fs::read(p(&format!("full/{file}"))).unwrap(),
            "{fmt}"
        );
    }
}

#[test]
fn generate_count_reports_all_three_counts() {
    let out = gverify(&["generate", &sample(), "--count"]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["unconditioned"], 566_048);
    assert_eq!(doc["conditional"], 181_944);
    assert_eq!(doc["realistic"], 8_740);
}

/// Line-level grammar for the DOT subset the renderer emits, plus
/// reference checks on edges.
fn check_dot(text: &str) -> Result<usize, String> {
    let quoted = r#""(?:[^"\\]|\\.)*""#;
    let attr = format!(r#"[a-z]+=(?:{quoted}|[A-Za-z]+)"#);
    let attrs = format!(r"\[{attr}(?:, {attr})*\]");
    let node = Regex::new(&format!(r"^  n(\d+) {attrs};$")).unwrap();
    let edge = Regex::new(&format!(r"^  n(\d+) -> n(\d+) {attrs};$")).unwrap();
    let default = Regex::new(&format!(r"^  node {attrs};$")).unwrap();

    let lines: Vec<&str> = text.lines().collect();
    if lines.first() != Some(&"digraph tree {") || lines.last() != Some(&"}") {
        return Err("missing digraph frame".into());
    }
    let mut declared = HashSet::new();
    let mut edges = Vec::new();
    let mut targets = HashSet::new();
    for l in &lines[1..lines.len() - 1] {
        if let Some(c) = edge.captures(l) {
            edges.push((c[1].to_string(), c[2].to_string()));
        } else if let Some(c) = node.captures(l) {
            if !declared.insert(c[1].to_string()) {
                return Err(format!("node n{} declared twice", &c[1]));
            }
        } else if !default.is_match(l) {
            return Err(format!("unexpected line: {l}"));
        }
    }
    for (a, b) in &edges {
        if !declared.contains(a) || !declared.contains(b) {
            return Err(format!("edge n{a} -> n{b} references an undeclared node"));
        }
        if !targets.insert(b.clone()) {
            return Err(format!("n{b} has two parents"));
        }
    }
    if edges.len() + 1 != declared.len() {
        return Err("not a tree".into());
    }
    Ok(declared.len())
}

#[test]
fn dot_output_is_well_formed() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&pipeline(dir.path())), 0);
    let dot = fs::read_to_string(dir.path().join("tree.dot")).unwrap();
    let nodes = check_dot(&dot).unwrap();
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("tree.json")).unwrap()).unwrap();
    assert_eq!(nodes, FactoredTree::from_json(&doc).unwrap().node_count());
}

#[test]
fn dot_checker_rejects_malformed_graphs() {
    assert!(check_dot("digraph tree {\n  n0 [label=\"a\"];\n").is_err());
    assert!(
        check_dot("digraph tree {\n  n0 [label=\"a\"];\n  n0 -> n1 [label=\"v\"];\n}").is_err()
    );
    assert!(check_dot("digraph tree {\n  n0 [label=\"a];\n}").is_err());
}
