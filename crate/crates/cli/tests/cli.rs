use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tep_core::fixtures;
use tep_core::pebbling::SequenceJson;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn tep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tep"))
        .args(args)
        .env_remove("TEP_BUDGET")
        .env_remove("TEP_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json_out(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(out)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn data_files_match_fixtures() {
    let read = |n: &str| std::fs::read_to_string(data(n)).unwrap();
    assert_eq!(read("fix-bp-det.json"), fixtures::bp_det().to_json() + "\n");
    assert_eq!(read("fix-bp-nd.json"), fixtures::bp_nd().to_json() + "\n");
    assert_eq!(read("forgetful-requery.json"), fixtures::forgetful_requery().to_json() + "\n");
    let a: tep_core::tep::TepInstance = serde_json::from_str(&read("fix-a.json")).unwrap();
    assert_eq!(a, fixtures::fix_a());
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for f in [&a, &b] {
        assert!(tep(&["gen", "--h", "2", "--k", "2", "--seed", "7", "-o", p(f)]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let other = tep(&["gen", "--h", "2", "--k", "2", "--seed", "8"]);
    assert_ne!(other.stdout, std::fs::read(&a).unwrap());
}

#[test]
fn gen_slot_count_and_usage_error() {
    let v = json_out(&tep(&["gen", "--h", "3", "--k", "2"]));
    let leaves = v["leaves"].as_array().unwrap().len();
    let entries: usize = v["tables"].as_object().unwrap().values().map(|t| t.as_array().unwrap().len() * 2).sum();
    assert_eq!(leaves + entries, 16);
    let bad = tep(&["gen", "--h", "1", "--k", "2"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("height"));
    assert_eq!(tep(&["gen", "--k", "2"]).status.code(), Some(2));
}

#[test]
fn pebble_numbers_and_witness() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.json");
    let out = tep(&["--format", "text", "pebble", "--game", "black", "--h", "4", "--witness", p(&w)]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("min=4"), "{}", stdout(&out));
    let seq: SequenceJson = serde_json::from_str(&std::fs::read_to_string(&w).unwrap()).unwrap();
    let seq = seq.to_sequence().unwrap();
    assert!(seq.validate().is_ok());
    assert_eq!(seq.max_pebbles_text(), "4");

    let whole = tep(&["--format", "text", "pebble", "--game", "whole", "--h", "4"]);
    assert!(stdout(&whole).contains("min=3"));
    let frac = json_out(&tep(&["pebble", "--game", "fractional", "--h", "3", "--d", "2"]));
    assert_eq!(frac["min"], "5/2");
    assert_eq!(frac["witness_valid"], true);
}

#[test]
fn compile_guess_verify_matches_fixture() {
    let out = tep(&["compile", p(&data("guess-verify.json")), "--k", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), fixtures::bp_nd().to_json() + "\n");
}

#[test]
fn compile_search_witness_then_check() {
    let dir = tempfile::tempdir().unwrap();
    let (w, bp) = (dir.path().join("w.json"), dir.path().join("bp.json"));
    assert!(tep(&["pebble", "--game", "black", "--h", "2", "--witness", p(&w)]).status.success());
    assert!(tep(&["compile", p(&w), "--k", "3", "-o", p(&bp)]).status.success());
    let v = json_out(&tep(&["check", p(&bp), "--computes", "--thrifty", "--syntactic-ro"]));
    assert_eq!(v["pass"], true);
    assert_eq!(v["structure"]["states"], 16);
    assert_eq!(v["verdicts"][0]["coverage"]["inputs"], 177147);
}

#[test]
fn check_det_fixture_passes() {
    let out = tep(&["check", p(&data("fix-bp-det.json")), "--thrifty", "--syntactic-ro", "--computes"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_out(&out);
    let verdicts = v["verdicts"].as_array().unwrap();
    assert_eq!(verdicts.len(), 3);
    assert!(verdicts.iter().all(|x| x["pass"] == true));
}

#[test]
fn check_failures_exit_one_with_witnesses() {
    let out = tep(&["check", p(&data("forgetful-requery.json")), "--null-path-free", "--semantic-ro"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json_out(&out);
    assert_eq!(v["verdicts"][0]["witness"]["kind"], "null_path");
    assert_eq!(v["verdicts"][1]["witness"]["kind"], "repeated_query");

    let nd = json_out(&tep(&["check", p(&data("fix-bp-nd.json")), "--node-independent"]));
    assert_eq!(nd["verdicts"][0]["pass"], false);

    let dup = tep(&["check", p(&data("duplicate-label.json")), "--computes"]);
    assert_eq!(dup.status.code(), Some(1));
    let v = json_out(&dup);
    assert_eq!(v["verdicts"][0]["witness"]["kind"], "structural");
}

#[test]
fn soundness_flag() {
    let ok = tep(&["check", p(&data("fix-bp-nd.json")), "--soundness", "ro"]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = tep(&["check", p(&data("forgetful-requery.json")), "--soundness", "ro-npf"]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(json_out(&bad)["verdicts"][0]["witness"]["kind"], "unsound");
}

#[test]
fn census_of_fixtures() {
    let det = tep(&["analyze", p(&data("fix-bp-det.json")), "--pipeline", "det-thrifty", "--all"]);
    assert_eq!(det.status.code(), Some(0));
    let v = json_out(&det);
    assert_eq!(v["max"], 16);
    assert_eq!(v["verdict"], "pass");
    // 64/k^(ceil(h/2)+1) is 16 here; the bucket target of 8 is out of reach.
    let nd = json_out(&tep(&["census", p(&data("fix-bp-nd.json")), "--pipeline", "ro-thrifty"]));
    assert_eq!(nd["max"], 16);
    assert_eq!(nd["bound"], "16");
    assert_eq!(nd["verdict"], "pass");
    for pipeline in ["algorithm1", "bitwise", "niro"] {
        let v = json_out(&tep(&["census", p(&data("fix-bp-det.json")), "--pipeline", pipeline]));
        assert_eq!(v["verdict"], "pass", "{pipeline}");
        assert_eq!(v["instances"], 64, "{pipeline}");
    }
    assert_eq!(tep(&["census", p(&data("fix-bp-det.json")), "--pipeline", "nope"]).status.code(), Some(2));
}

#[test]
fn analyze_single_instance() {
    for pipeline in ["det-thrifty", "algorithm1", "bitwise", "niro"] {
        let out = tep(&["analyze", p(&data("fix-bp-det.json")), "--pipeline", pipeline, "--instance", p(&data("fix-a.json"))]);
        assert_eq!(out.status.code(), Some(0), "{pipeline}: {}", String::from_utf8_lossy(&out.stderr));
        let v = json_out(&out);
        assert_eq!(v["path"]["complete"], true);
        assert_eq!(v["supercritical"]["position"], 2, "{pipeline}");
    }
    let out = tep(&["analyze", p(&data("fix-bp-nd.json")), "--pipeline", "ro-thrifty", "--instance", p(&data("fix-a.json"))]);
    let v = json_out(&out);
    assert_eq!(v["tag"]["u"], 2);
    assert!(tep(&["analyze", p(&data("fix-bp-det.json")), "--pipeline", "niro"]).status.code() == Some(2));
    let wrong_shape =
        tep(&["analyze", p(&data("fix-bp-det.json")), "--pipeline", "det-thrifty", "--instance", p(&data("fix-b.json"))]);
    assert_eq!(wrong_shape.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&wrong_shape.stderr).contains("h=3"));
}

#[test]
fn export_dot() {
    let out = stdout(&tep(&["export", p(&data("fix-bp-det.json")), "--instance", p(&data("fix-a.json"))]));
    assert!(out.starts_with("digraph bp {"));
    assert_eq!(out.matches("style=bold").count(), 4);
    let seq = stdout(&tep(&["export", p(&data("guess-verify.json")), "--step", "2"]));
    assert!(seq.contains("n2 [label=\"2\\nb=1 w=0\", style=filled, fillcolor=black"));
    assert!(seq.contains("fillcolor=white"));
    assert_eq!(tep(&["export", p(&data("guess-verify.json")), "--step", "99"]).status.code(), Some(2));
}

#[test]
fn budget_layers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tep.toml");
    std::fs::write(&cfg, "format = \"json\"\njobs = 1\n[budget]\nenumeration_cap = 10\nsamples = 5\n").unwrap();
    let bp = data("fix-bp-nd.json");
    let mode = |out: &Output| json_out(out)["verdicts"][0]["coverage"].clone();

    let sampled = tep(&["--config", p(&cfg), "check", p(&bp), "--computes"]);
    assert_eq!(mode(&sampled)["mode"], "sampled");
    assert_eq!(mode(&sampled)["inputs"], 5);

    let flag = tep(&["--config", p(&cfg), "--enumeration-cap", "64", "check", p(&bp), "--computes"]);
    assert_eq!(mode(&flag)["mode"], "exhaustive");

    let env = Command::new(env!("CARGO_BIN_EXE_tep"))
        .args(["--config", p(&cfg), "check", p(&bp), "--computes"])
        .env("TEP_BUDGET", "100")
        .output()
        .unwrap();
    assert_eq!(mode(&env)["mode"], "exhaustive");

    let det = tep(&["--config", p(&cfg), "check", p(&data("fix-bp-det.json")), "--computes"]);
    assert_eq!(mode(&det)["mode"], "cylinder");

    std::fs::write(&cfg, "[budget]\nenumeration_cap = 0\n").unwrap();
    assert_eq!(tep(&["--config", p(&cfg), "check", p(&bp)]).status.code(), Some(2));
    std::fs::write(&cfg, "colour = 1\n").unwrap();
    assert_eq!(tep(&["--config", p(&cfg), "check", p(&bp)]).status.code(), Some(2));
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let f = dir.path().join(name);
        let out = tep(&["--jobs", "1", "census", p(&data("fix-bp-nd.json")), "--pipeline", "ro-thrifty", "-o", p(&f)]);
        assert!(out.status.success());
        assert!(out.stdout.is_empty());
        std::fs::read(f).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(leftovers.len(), 2);
}
