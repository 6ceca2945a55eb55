use std::path::PathBuf;
use std::process::{Command, Output};

use relex::{Engine, EngineConfig, ExploreRequest};
use relex_core::kg::Iri;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn relex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relex"))
        .arg("--config")
        .arg(fixtures().join("relex.toml"))
        .args(args)
        .env_remove("RELEX_EMBEDDING_URL")
        .env_remove("RELEX_GENERATION_URL")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const VERMEER: &str = "http://www.wikidata.org/entity/Q41264";

#[test]
fn exit_codes() {
    let ok = relex(&["load", "--stats"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(stdout(&ok).starts_with("triples: "));

    assert_eq!(relex(&["explore", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(relex(&["nonsense"]).status.code(), Some(1));
    assert_eq!(relex(&["explore", "--alpha", "abc"]).status.code(), Some(1));
    assert_eq!(relex(&["--help"]).status.code(), Some(0));

    let bad_alpha = relex(&["explore", "--e1", VERMEER, "--alpha", "1.5"]);
    assert_eq!(bad_alpha.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_alpha.stderr).starts_with("error: "));
    assert_eq!(relex(&["load", "/does/not/exist.nt"]).status.code(), Some(2));
    assert_eq!(relex(&["discover", "--query-set", "missing"]).status.code(), Some(2));
}

#[test]
fn explore_output_equals_the_library_ranking() {
    let out = relex(&["--format", "json", "explore", "--e1", VERMEER, "--alpha", "0.7", "--k", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let got: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();

    let engine = Engine::from_config(EngineConfig::load(&fixtures().join("relex.toml")).unwrap()).unwrap();
    let req = ExploreRequest {
        entity1: Some(Iri::new(VERMEER).unwrap()),
        alpha: Some(0.7),
        k: Some(5),
        facets: Some(Default::default()),
        ..Default::default()
    };
    assert_eq!(got, serde_json::to_value(engine.explore(&req).unwrap()).unwrap());
    assert_eq!(got["items"].as_array().unwrap().len(), 5);
}

#[test]
fn explore_is_byte_identical_across_runs() {
    let args = ["explore", "--e1", VERMEER, "--context", "Delft", "--k", "5"];
    let a = relex(&args);
    let b = relex(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("alpha=0.5000 k=5 "), "{text}");
}

#[test]
fn evaluate_and_baselines_run_offline() {
    let report = relex(&["evaluate", "--system", "graph"]);
    assert_eq!(report.status.code(), Some(0), "{}", String::from_utf8_lossy(&report.stderr));
    let text = stdout(&report);
    assert!(text.lines().any(|l| l.starts_with("f1=")), "{text}");

    let kb = relex(&["baseline", "--method", "knowledge"]);
    assert_eq!(kb.status.code(), Some(0));
    assert!(!stdout(&kb).is_empty());

    assert_eq!(relex(&["baseline", "--method", "graph"]).status.code(), Some(2), "graph baseline needs --e1");
    assert_eq!(relex(&["baseline", "--method", "other"]).status.code(), Some(1));
}

#[test]
fn in_process_runner_matches_the_binary() {
    let config = fixtures().join("relex.toml");
    let args = ["relex", "--config", config.to_str().unwrap(), "discover"];
    let (mut out, mut err) = (Vec::new(), Vec::new());
    assert_eq!(relex::cli::run(args, &mut out, &mut err), 0);
    assert_eq!(out, relex(&["discover"]).stdout);
}
