//! End-to-end tests of the installed binary: real process, real files, real
//! exit codes.  The in-crate unit tests drive `cli::run` with byte buffers;
//! here we make sure the same behaviour survives the trip through a shell.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stablered"))
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fixture(name: &str) -> String {
    fixture_dir().join(name).to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let Output { status, stdout, stderr } = bin().args(args).output().unwrap();
    (
        status.code().expect("terminated by signal"),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

/// Every document in the fixture corpus, by file extension.
fn corpus() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("sd" | "dual" | "ff" | "fam")
            )
        })
        .collect();
    files.sort();
    assert!(files.len() >= 7, "fixture corpus went missing");
    files
}

fn temp_input(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("stablered_e2e_{}_{name}", std::process::id()));
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn check_accepts_every_corpus_document() {
    for file in corpus() {
        let (code, out, err) = run(&["check", file.to_str().unwrap()]);
        assert_eq!(code, 0, "{}: stderr: {err}", file.display());
        assert!(out.ends_with("result=ok\n"), "{}: {out}", file.display());
    }
}

#[test]
fn every_report_is_well_formed_json_in_json_format() {
    let applicable: &[(&str, fn(&str) -> bool)] = &[
        ("validate", |_| true),
        ("chi", |ext| ext != "ff"),
        ("stable-reduce", |ext| ext != "ff"),
        ("cover", |ext| ext != "ff"),
        ("invariants", |ext| ext != "ff"),
        ("check", |_| true),
        ("splice", |ext| ext == "dual"),
        ("dual", |ext| ext == "sd"),
        ("family", |ext| ext == "fam"),
    ];
    // the fast route lives on splice diagrams, so it refuses dual graphs
    // with cycles (the tower in `cover` and `check` still handles them)
    let needs_tree_form = ["stable-reduce", "invariants", "splice"];
    for file in corpus() {
        let ext = file.extension().unwrap().to_str().unwrap();
        let cyclic = file.file_stem().unwrap().to_str().unwrap().contains("cycle");
        for (cmd, applies) in applicable {
            if !applies(ext) {
                continue;
            }
            let (code, out, err) =
                run(&[cmd, file.to_str().unwrap(), "--format", "json"]);
            if cyclic && needs_tree_form.contains(cmd) {
                assert_eq!(code, 1, "{cmd} {}: {out}", file.display());
                assert!(err.contains("tree"), "{err}");
                continue;
            }
            assert_eq!(code, 0, "{cmd} {}: stderr: {err}", file.display());
            serde_json::from_str::<serde_json::Value>(&out)
                .unwrap_or_else(|e| panic!("{cmd} {}: bad JSON ({e}): {out}", file.display()));
        }
    }
}

#[test]
fn text_and_json_reports_carry_the_same_values() {
    let args = ["invariants", &fixture("running_example.sd"), "--finite", &fixture("running_example.ff")];
    let (code, text, _) = run(&args);
    assert_eq!(code, 0);
    let (code, json, _) = run(&[&args[..], &["--format", "json"]].concat());
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    for line in text.lines() {
        let (key, value) = line.split_once('=').unwrap();
        let from_json = match &v[key] {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::Array(items) => format!(
                "[{}]",
                items
                    .iter()
                    .map(|i| match i {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            other => other.to_string(),
        };
        assert_eq!(from_json, value, "field {key}");
    }
}

#[test]
fn oracle_flag_runs_the_tower_on_family_input() {
    let (code, out, err) = run(&["family", &fixture("m2_family.fam"), "--oracle"]);
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("cover_degree=60"), "{out}");
    assert!(out.contains("node_orders=[7,7]"), "{out}");
}

#[test]
fn a_data_table_is_rejected_as_a_diagram() {
    let (code, _, err) = run(&["stable-reduce", &fixture("running_example.ff")]);
    assert_eq!(code, 1);
    assert!(err.contains("--finite"), "{err}");
}

#[test]
fn exit_codes_reach_the_shell() {
    // usage error: unknown flag, and unreadable file
    let (code, _, err) = run(&["chi", "--frobnicate", "x"]);
    assert_eq!(code, 2);
    assert!(!err.is_empty());
    let (code, _, err) = run(&["chi", "/no/such/file.sd"]);
    assert_eq!(code, 2);
    assert!(err.contains("cannot read"), "{err}");

    // domain error: a curve configuration that is not a fibre
    let bad = temp_input("zero_relation.dual", "dual\nnode a selfint=-1 mult=1\n");
    let (code, out, _) = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(out.contains("valid=false"), "{out}");

    // success, quietly
    let (code, out, _) = run(&["chi", &fixture("torus_knot.sd"), "--quiet"]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
}

#[test]
fn version_and_help_exit_clean() {
    let (code, out, _) = run(&["--version"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("stablered"), "{out}");
    let (code, out, _) = run(&["check", "--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("consistency"), "{out}");
}

#[test]
fn converted_diagrams_feed_back_into_the_pipeline() {
    // splice -> dual on disk -> stable-reduce must agree with the direct run
    let (code, dual_text, _) = run(&["dual", &fixture("torus_knot.sd")]);
    assert_eq!(code, 0);
    let dual_path = temp_input("torus_knot.dual", &dual_text);
    let (code, via_dual, _) = run(&["stable-reduce", dual_path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (code, direct, _) = run(&["stable-reduce", &fixture("torus_knot.sd")]);
    assert_eq!(code, 0);
    assert_eq!(via_dual, direct);
}
