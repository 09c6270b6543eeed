use std::path::{Path, PathBuf};
use std::process::Command;

use semnet::pipeline::{self, Overrides, Run};

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini")
}

fn run_in(out: &Path) -> Run {
    Run::load(&fixture_dir().join("config.json"), &Overrides { output_dir: Some(out.to_path_buf()), ..Default::default() }).unwrap()
}

fn semnet(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_semnet")).args(args).output().unwrap()
}

// Associative and categorical counts were checked against an independent
// networkx reconstruction of the same filter chain.
#[test]
fn mini_corpus_stats_match_golden() {
    let tmp = tempfile::tempdir().unwrap();
    let run = run_in(tmp.path());
    pipeline::cmd_build(&run).unwrap();
    pipeline::cmd_stats(&run).unwrap();
    let got = std::fs::read_to_string(tmp.path().join("network_stats.csv")).unwrap();
    let want = include_str!("golden/mini_network_stats.csv");
    assert_eq!(got, want);
}

#[test]
fn graph_files_round_trip_through_reload() {
    let tmp = tempfile::tempdir().unwrap();
    let run = run_in(tmp.path());
    pipeline::cmd_build(&run).unwrap();
    let (nets, hashes) = pipeline::load_networks(&run).unwrap();
    assert_eq!(nets.len(), 2);
    assert_eq!(hashes.len(), 6);
    for m in &nets {
        assert_eq!(m.layers().len(), 3);
    }
}

#[test]
fn outputs_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for d in ["a", "b"] {
        let run = run_in(&tmp.path().join(d));
        pipeline::cmd_build(&run).unwrap();
        pipeline::cmd_reduce(&run).unwrap();
        pipeline::cmd_bias(&run).unwrap();
        let json = std::fs::read(tmp.path().join(d).join("bias_report.json")).unwrap();
        let red = std::fs::read(tmp.path().join(d).join("reduction_humans.json")).unwrap();
        let manifest = std::fs::read(tmp.path().join(d).join("manifest_bias.json")).unwrap();
        reports.push((json, red, manifest));
    }
    assert!(reports[0] == reports[1]);
}

#[test]
fn render_reproduces_bias_figures() {
    let tmp = tempfile::tempdir().unwrap();
    let run = run_in(tmp.path());
    pipeline::cmd_build(&run).unwrap();
    pipeline::cmd_bias(&run).unwrap();
    let before = std::fs::read(tmp.path().join("effects_disaggregated.svg")).unwrap();
    std::fs::remove_file(tmp.path().join("effects_disaggregated.svg")).unwrap();
    pipeline::cmd_render(&run).unwrap();
    assert_eq!(std::fs::read(tmp.path().join("effects_disaggregated.svg")).unwrap(), before);
}

#[test]
fn cli_missing_input_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = std::fs::read_to_string(fixture_dir().join("config.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&cfg).unwrap();
    v["agents"][0]["definitions_file"] = "nope.tsv".into();
    for f in std::fs::read_dir(fixture_dir()).unwrap() {
        let p = f.unwrap().path();
        if p.is_file() {
            std::fs::copy(&p, tmp.path().join(p.file_name().unwrap())).unwrap();
        }
    }
    let path = tmp.path().join("config.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let out = semnet(&["--config", path.to_str().unwrap(), "build"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("agents[0].definitions_file"), "{err}");
}

#[test]
fn cli_reduce_before_build_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture_dir().join("config.json");
    let out = semnet(&["--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "reduce"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("semnet build"));
}

#[test]
fn cli_unknown_config_field_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("config.json");
    std::fs::write(&path, r#"{"agents": [], "vocabulary_file": "v.txt", "colour": 1}"#).unwrap();
    let out = semnet(&["--config", path.to_str().unwrap(), "stats"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_build_writes_graphs_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture_dir().join("config.json");
    let out = semnet(&["--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "--threads", "2", "build"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("graphs/model_categorical.tsv").is_file());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("manifest_build.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
}
