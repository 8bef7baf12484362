use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use contextrec_service::cli::{EXIT_INTERNAL, EXIT_OK, EXIT_USER};
use contextrec_service::run_cli;
use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contextrec"))
        .args(args)
        .output()
        .unwrap()
}

/// Runs in-process and returns (exit code, stdout, stderr).
fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("contextrec").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok_json(args: &[&str]) -> Value {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let (code, out, err) = run(&full);
    assert_eq!(code, EXIT_OK, "{args:?}: {err}");
    serde_json::from_str(&out).unwrap()
}

fn ingested() -> (TempDir, String) {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("engine").display().to_string();
    let micro = fixture("micro.jsonl").display().to_string();
    let config = fixture("contexts.json").display().to_string();
    ok_json(&["ingest", &micro, &dir, "--config", &config]);
    (tmp, dir)
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_1() {
    let output = bin(&["frobnicate"]);
    assert_eq!(output.status.code(), Some(EXIT_USER));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("Usage"), "{stderr}");
    assert!(output.stdout.is_empty());
}

#[test]
fn help_and_version_exit_0() {
    let output = bin(&["--help"]);
    assert_eq!(output.status.code(), Some(EXIT_OK));
    let stdout = String::from_utf8_lossy(&output.stdout);
    for sub in [
        "ingest",
        "index",
        "embed-graph",
        "train",
        "build-context",
        "query",
        "recommend",
        "serve",
    ] {
        assert!(stdout.contains(sub), "{sub} missing from help");
    }
    assert_eq!(run(&["--version"]).0, EXIT_OK);
}

#[test]
fn binary_query_outputs_json() {
    let (_tmp, dir) = ingested();
    assert!(bin(&["index", &dir]).status.success());
    assert!(bin(&["build-context", &dir]).status.success());
    let output = bin(&["--json", "query", &dir, "seed=zhao2013 +method"]);
    assert_eq!(output.status.code(), Some(EXIT_OK));
    let items: Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(items[0]["id"], "cortes1995");
    assert_eq!(items.as_array().unwrap().len(), 1);
}

#[test]
fn summaries_in_json() {
    let (_tmp, dir) = ingested();
    let index = ok_json(&["index", &dir]);
    assert_eq!(index["documents"], 3);
    assert_eq!(index["citation_edges"], 1);
    assert_eq!(index["weighted_edges"], 0);
    let context = ok_json(&["build-context", &dir]);
    assert_eq!(context["edges"], 2);
    assert_eq!(context["by_source"]["annotation"], 2);
    assert!(context["by_source"].get("classifier").is_none());
}

#[test]
fn human_output_lists_results() {
    let (_tmp, dir) = ingested();
    run(&["index", &dir]);
    run(&["build-context", &dir]);
    let (code, out, _) = run(&["query", &dir, "seed=zhao2013 +resource -method"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("farber2019") && !out.contains("cortes1995"), "{out}");
    let (_, out, _) = run(&["query", &dir, "seed=cortes1995 +resource"]);
    assert_eq!(out, "no results\n");
}

#[test]
fn recommend_modes() {
    let (_tmp, dir) = ingested();
    run(&["index", &dir]);
    run(&["build-context", &dir]);
    let diverse = ok_json(&["recommend", &dir, "zhao2013", "-k", "2"]);
    let ids: Vec<&str> = diverse
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["cortes1995", "farber2019"]);
    let focused = ok_json(&[
        "recommend",
        &dir,
        "zhao2013",
        "--mode",
        "focused",
        "--context",
        "method",
    ]);
    assert_eq!(focused[0]["id"], "cortes1995");
    let (code, _, err) = run(&["recommend", &dir, "zhao2013", "--mode", "focused"]);
    assert_eq!(code, EXIT_USER);
    assert!(err.starts_with("error: ") && err.lines().count() == 1, "{err}");
}

#[test]
fn user_errors_exit_1_with_one_line() {
    let (_tmp, dir) = ingested();
    let cases: Vec<Vec<&str>> = vec![
        vec!["query", &dir, "seed=zhao2013 +method"],
        vec!["ingest", "/nonexistent/corpus.jsonl", &dir],
        vec!["embed-graph", &dir],
    ];
    for args in &cases {
        let (code, out, err) = run(args);
        assert_eq!(code, EXIT_USER, "{args:?}");
        assert!(out.is_empty());
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("error: "));
    }
    run(&["index", &dir]);
    run(&["build-context", &dir]);
    for query in [
        "seed=nobody +method",
        "seed=zhao2013 +findings",
        "seed=zhao2013",
        "seed=zhao2013 +method k=abc",
    ] {
        let (code, _, err) = run(&["query", &dir, query]);
        assert_eq!(code, EXIT_USER, "{query}");
        assert_eq!(err.lines().count(), 1);
    }
}

#[test]
fn duplicate_ids_and_unknown_annotation_contexts_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("dup.jsonl");
    fs::write(&corpus, fs::read_to_string(fixture("micro.jsonl")).unwrap().repeat(2)).unwrap();
    let dir = tmp.path().join("e").display().to_string();
    let (code, _, err) = run(&["ingest", &corpus.display().to_string(), &dir]);
    assert_eq!(code, EXIT_USER);
    assert!(err.contains("zhao2013"), "{err}");

    let config = tmp.path().join("ctx.json");
    fs::write(&config, r#"{"contexts": ["findings"]}"#).unwrap();
    let micro = fixture("micro.jsonl").display().to_string();
    let (code, _, err) = run(&["ingest", &micro, &dir, "--config", &config.display().to_string()]);
    assert_eq!(code, EXIT_USER);
    assert!(err.contains("method"), "{err}");
}

#[test]
fn unwritable_directory_is_internal() {
    let tmp = TempDir::new().unwrap();
    let (_keep, dir) = ingested();
    // copy the engine into place, then make the graph path a directory
    let target = tmp.path().join("engine");
    fs::create_dir(&target).unwrap();
    for entry in fs::read_dir(&dir).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), target.join(entry.file_name())).unwrap();
    }
    fs::create_dir(target.join("weighted_graph.txt")).unwrap();
    let (code, _, err) = run(&["index", &target.display().to_string()]);
    assert_eq!(code, EXIT_INTERNAL, "{err}");
}

#[test]
fn train_then_classifier_edges() {
    let (_tmp, dir) = ingested();
    run(&["index", &dir]);
    let pairs = fixture("pairs.jsonl").display().to_string();
    let vectors = fixture("word_vectors.txt").display().to_string();

    let (code, _, err) = run(&["train", &dir, &pairs]);
    assert_eq!(code, EXIT_USER);
    assert!(err.contains("--embeddings"), "{err}");

    let summary = ok_json(&["train", &dir, &pairs, "--embeddings", &vectors]);
    assert_eq!(summary["labeled_pairs"], 2);
    assert_eq!(summary["negative_pairs"], 1);
    assert!(summary["final_loss"].as_f64().unwrap().is_finite());
    assert!(Path::new(&dir).join("model.txt").is_file());
    assert!(Path::new(&dir).join("word_vectors.txt").is_file());

    let context = ok_json(&["build-context", &dir]);
    assert!(context["by_source"].get("classifier").is_some());
    let items = ok_json(&["query", &dir, "seed=zhao2013 +method"]);
    assert!(items.as_array().unwrap().iter().any(|i| i["id"] == "cortes1995"));
}

#[test]
fn embed_graph_on_cocited_corpus() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("c.jsonl");
    let doc = |id: &str, cites: &[&str]| {
        let citations: Vec<Value> = cites
            .iter()
            .map(|t| serde_json::json!({"target": t, "section": 0, "paragraph": 0, "sentence": 0}))
            .collect();
        serde_json::json!({
            "id": id,
            "title": id,
            "sections": [{"heading": "Method", "paragraphs": [["A method for data."]]}],
            "citations": citations
        })
        .to_string()
    };
    let lines = [
        doc("p", &["a", "b"]),
        doc("q", &["b", "c"]),
        doc("a", &[]),
        doc("b", &[]),
        doc("c", &[]),
    ];
    fs::write(&corpus, lines.join("\n")).unwrap();
    let dir = tmp.path().join("e").display().to_string();
    ok_json(&["ingest", &corpus.display().to_string(), &dir]);
    let index = ok_json(&["index", &dir]);
    assert_eq!(index["weighted_edges"], 2);
    let summary = ok_json(&["embed-graph", &dir, "--dims", "8", "--seed", "3"]);
    assert_eq!(summary, serde_json::json!({"nodes": 3, "dims": 8}));
    let first = fs::read_to_string(Path::new(&dir).join("graph_embedding.txt")).unwrap();
    ok_json(&["embed-graph", &dir, "--dims", "8", "--seed", "3"]);
    let second = fs::read_to_string(Path::new(&dir).join("graph_embedding.txt")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn steps_out_of_order_name_the_missing_step() {
    let (_tmp, dir) = ingested();
    let (code, _, err) = run(&["embed-graph", &dir]);
    assert_eq!(code, EXIT_USER);
    assert!(err.contains("index"), "{err}");
}

#[test]
fn serve_rejects_bad_settings() {
    let (code, _, err) = run(&["serve", "/nonexistent/engine", "--port", "8123"]);
    assert_eq!(code, EXIT_USER);
    assert!(err.contains("does not exist"), "{err}");
    let (_tmp, dir) = ingested();
    let (code, _, _) = run(&["serve", &dir, "--port", "0"]);
    assert_eq!(code, EXIT_USER);
}
