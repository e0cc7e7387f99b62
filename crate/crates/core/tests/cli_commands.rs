mod common;

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use galaxysearch::cli::{cmd_build, cmd_eval, cmd_search};
use galaxysearch::evaluation::EvalConfig;
use galaxysearch::graph::{Layer, NodeKind};
use galaxysearch::pipeline::{GraphDocument, RunConfig};

use common::*;

fn galaxysearch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_galaxysearch")).args(args).output().unwrap()
}

fn abortion_dir() -> String {
    fixture_dir("abortion").to_string_lossy().into_owned()
}

fn judgments(file: &str) -> PathBuf {
    fixture_dir("judgments").join(file)
}

#[test]
fn bidirectional_only_build_matches_golden() {
    let cfg = RunConfig { seeds: vec!["Abortion".into()], weights: "1,0,0,0".parse().unwrap(), ..RunConfig::default() };
    let json = cmd_build(&fixture_source("abortion"), &cfg, None).unwrap();
    let golden = tests_dir("golden").join("abortion-bidirectional.json");
    assert_eq!(json, fs::read_to_string(golden).unwrap());

    let doc: GraphDocument = serde_json::from_str(&json).unwrap();
    let g = doc.graph().unwrap();
    assert!(g.edges().all(|(_, _, layer, _)| matches!(layer, Layer::Bidirectional | Layer::Mention)));
    let bid = g.edges_in(Layer::Bidirectional).count();
    assert!(bid > 0 && bid.is_multiple_of(2));
}

#[test]
fn build_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "seeds = [\"Pregnancy\"]\nthreshold = 0.0\ninclude_web = true\n").unwrap();
    let out = galaxysearch(&[
        "--backend",
        &abortion_dir(),
        "--config",
        config.to_str().unwrap(),
        "build",
        "--seeds",
        "Abortion",
        "--include-web",
        "false",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: GraphDocument = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc.seeds, vec!["Abortion"]);
    assert_eq!(doc.threshold, 0.0);
    assert!(doc.nodes.iter().all(|n| n.kind == NodeKind::Article));
}

#[test]
fn exit_codes_are_distinct() {
    let no_seed = galaxysearch(&["--backend", &abortion_dir(), "build", "--seeds", "Nonexistent article"]);
    assert_eq!(no_seed.status.code(), Some(3));
    let bad_threshold = galaxysearch(&["--backend", &abortion_dir(), "build", "--seeds", "Abortion", "--threshold", "2"]);
    assert_eq!(bad_threshold.status.code(), Some(2));
    let no_backend = galaxysearch(&["build", "--seeds", "Abortion"]);
    assert_eq!(no_backend.status.code(), Some(2));
    let missing_fixture = galaxysearch(&["--backend", "/nonexistent/fixture", "search", "abortion"]);
    assert_ne!(missing_fixture.status.code(), Some(0));
    assert!(!missing_fixture.stderr.is_empty());
}

#[test]
fn search_prints_titles() {
    let text = cmd_search(&fixture_source("abortion"), "abortion", 3).unwrap();
    assert_eq!(text, "Abortion\nAbortion debate\nAbortion law\n");
    let out = galaxysearch(&["--backend", &abortion_dir(), "search", "abortion", "--limit", "1"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "Abortion\n");
}

#[test]
fn eval_ideal_variant_scores_one() {
    let results = [judgments("ideal.txt"), judgments("shuffled.txt")];
    let report = cmd_eval(&results, &judgments("abortion.tsv"), &EvalConfig::default(), None).unwrap();
    assert_eq!(report.rows[0].variant, "ideal");
    assert!((report.rows[0].ndcg - 1.0).abs() < 1e-12);
    assert_eq!(report.rows[1].variant, "shuffled");
    assert!(report.rows[1].ndcg < report.rows[0].ndcg);

    let out = galaxysearch(&[
        "eval",
        judgments("shuffled.txt").to_str().unwrap(),
        judgments("ideal.txt").to_str().unwrap(),
        "--judgments",
        judgments("abortion.tsv").to_str().unwrap(),
        "--k",
        "5",
    ]);
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0].split_whitespace().collect::<Vec<_>>(), ["variant", "nDCG@5"]);
    assert_eq!(lines[1].split_whitespace().collect::<Vec<_>>(), ["ideal", "1.000000"]);
    assert!(lines[2].starts_with("shuffled"));
}

#[test]
fn eval_accepts_graph_documents_as_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { seeds: vec!["Abortion".into()], ..RunConfig::default() };
    cmd_build(&fixture_source("abortion"), &cfg, Some(dir.path())).unwrap();
    let results = [dir.path().join("graph.json")];
    let report = cmd_eval(&results, &judgments("abortion.tsv"), &EvalConfig::default(), Some("abortion")).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert!(report.rows[0].ndcg > 0.0 && report.rows[0].ndcg <= 1.0);
}

#[test]
fn map_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("series.json");
    let status = galaxysearch(&[
        "--backend",
        fixture_dir("dated-link").to_str().unwrap(),
        "map",
        "--seeds",
        "Alpha",
        "--timestamps",
        "2011-02-01,2011-04-01",
        "--out",
        out.to_str().unwrap(),
    ])
    .status;
    assert!(status.success());
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(doc["frames"][0]["at"], "2011-02-01T00:00:00Z");
    assert_eq!(doc["frames"][1]["at"], "2011-04-01T00:00:00Z");
}
