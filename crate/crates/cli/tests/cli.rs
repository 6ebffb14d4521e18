use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn lexverify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lexverify")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn fsc() -> String {
    fixture("fsc_case.json").display().to_string()
}

#[test]
fn check_case_reports_unsat_with_core() {
    let out = lexverify(&["check-case", &fsc()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["status"], "unsat");
    assert!(v["core_groups"].as_array().unwrap().iter().any(|g| g == "meta:penalty_conditions"));
}

#[test]
fn contrary_expectation_exits_two() {
    let out = lexverify(&["check-case", &fsc(), "--expect", "sat"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["status"], "unsat");
    assert_eq!(lexverify(&["check-law", &fsc()]).status.code(), Some(0));
}

#[test]
fn optimize_finds_the_single_flip() {
    for strategy in ["linear", "core"] {
        let out = lexverify(&["optimize", &fsc(), "--strategy", strategy]);
        assert_eq!(out.status.code(), Some(0));
        let v = json(&out);
        assert_eq!(v["cost"], 1);
        assert_eq!(v["delta"][0]["summary"], "improvement_plan_executed: false → true");
        assert!(v["trace"][0].as_str().unwrap().contains("improvement plan"));
    }
}

#[test]
fn illegal_terms_match_the_frozen_set() {
    let out = lexverify(&["illegal-terms", &fsc()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let frozen: Vec<String> = serde_json::from_str(&std::fs::read_to_string(fixture("oracle/fsc_illegal_terms.json")).unwrap()).unwrap();
    let mut ids: Vec<String> =
        v["terms"].as_array().unwrap().iter().flat_map(|t| t["ids"].as_array().unwrap().iter().map(|i| i.as_str().unwrap().to_string())).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids, frozen);
}

#[test]
fn broken_bundle_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let mut bundle: Value = serde_json::from_str(&std::fs::read_to_string(fixture("fsc_case.json")).unwrap()).unwrap();
    bundle["constraints"][0]["expr"] = serde_json::json!({ "var": "undeclared" });
    let path = dir.path().join("broken.json");
    std::fs::write(&path, serde_json::to_string(&bundle).unwrap()).unwrap();
    let out = lexverify(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stdout.is_empty());
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{").unwrap();
    let out = lexverify(&["check-case", garbage.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["error"], "unreadable_bundle");
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(lexverify(&["optimize"]).status.code(), Some(1));
    assert_eq!(lexverify(&["optimize", &fsc(), "--weight-override", "nokey"]).status.code(), Some(1));
    assert_eq!(lexverify(&["--help"]).status.code(), Some(0));
}

#[test]
fn gen_cases_is_reproducible() {
    let a = lexverify(&["gen-cases", "--n", "3", "--seed", "11"]);
    let b = lexverify(&["gen-cases", "--n", "3", "--seed", "11"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a).as_array().unwrap().len(), 3);

    let dir = tempfile::tempdir().unwrap();
    let out = lexverify(&["gen-cases", "--n", "2", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    for f in json(&out)["written"].as_array().unwrap() {
        let check = lexverify(&["check-case", f.as_str().unwrap()]);
        assert_eq!(check.status.code(), Some(0));
    }
}

#[test]
fn extract_articles_matches_golden() {
    let out = lexverify(&["extract-articles", fixture("parser/en_snippet.txt").to_str().unwrap(), "--pretty"]);
    assert_eq!(out.status.code(), Some(0));
    let golden = std::fs::read_to_string(fixture("parser/en_snippet.golden.json")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden);
}

#[test]
fn search_ranks_the_corpus() {
    let corpus = fixture("retrieval/corpus.jsonl");
    let out = lexverify(&["search", "capital improvement plan", "--corpus", corpus.to_str().unwrap(), "-k", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["hits"].as_array().unwrap().len(), 3);
    let bad = lexverify(&["search", "capital", "--corpus", corpus.to_str().unwrap(), "--alpha", "1.5"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn synthesize_with_replay_and_mock() {
    let articles = dir_extract();
    let replay = format!("replay:{}", fixture("replay/synthesis_success.json").display());
    let out = lexverify(&["synthesize", fixture("gateway/fsc_case.txt").to_str().unwrap(), "--articles", articles.1.to_str().unwrap(), "--llm", &replay]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["attempts"].as_array().unwrap().len(), 1);

    let out = lexverify(&["synthesize", fixture("gateway/fsc_case.txt").to_str().unwrap(), "--articles", articles.1.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"], "synthesis_exhausted");
}

/// Extraction output written to a temp file, as `--articles` accepts it.
fn dir_extract() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let out = lexverify(&["extract-articles", fixture("parser/en_insurance.txt").to_str().unwrap()]);
    let path = dir.path().join("articles.json");
    std::fs::write(&path, out.stdout).unwrap();
    (dir, path)
}
