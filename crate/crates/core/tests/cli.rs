mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::toy_path;
use muxnav::pipeline::{load_edges, STAGE_ALGORITHMS};
use muxnav::predict::run_stage;

fn muxnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_muxnav")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn trim_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("layer,source,target,flow\n");
    for (k, flow) in [100.0, 95.0, 91.0, 50.0, 40.0, 30.0, 20.0, 10.0, 5.0, 1.0].iter().enumerate() {
        text.push_str(&format!("0,a{k},b{k},{flow}\n"));
    }
    let input = write(dir.path(), "in.csv", &text);
    let out = dir.path().join("out");
    let o = muxnav(&["trim", "--input", &input, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("kept 3 / removed 7"));
    assert_eq!(fs::read_to_string(out.join("trimmed.csv")).unwrap().lines().count(), 4);

    let o = muxnav(&["trim", "--input", &input, "--trim-ratio", "1.0", "--out", out.to_str().unwrap()]);
    assert!(stdout(&o).contains("kept 1 / removed 9"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = muxnav(&["trim", "--input", missing.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.csv"));

    assert_eq!(muxnav(&["trim", "--bogus"]).status.code(), Some(1));
    assert_eq!(muxnav(&[]).status.code(), Some(1));
    let toy = toy_path();
    let toy = toy.to_str().unwrap();
    assert_eq!(muxnav(&["predict", "--input", toy, "--threshold", "1.0", "--out", out]).status.code(), Some(1));
    assert_eq!(muxnav(&["scenario", "--input", toy, "--fraction", "1.0", "--out", out]).status.code(), Some(1));

    let bad = write(dir.path(), "bad.csv", "layer,source,target,flow\n0,a,b,oops\n");
    let o = muxnav(&["trim", "--input", &bad, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn cycle_gap_in_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("layer,source,target,flow\n");
    for i in 0..8 {
        text.push_str(&format!("0,n{i},n{},1\n", (i + 1) % 8));
    }
    let input = write(dir.path(), "c8.csv", &text);
    let out = dir.path().join("out");
    let o = muxnav(&["navigability", "--input", &input, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("navigability/original_rwc_undirected.json"));
    let gap = report["spectral_gap"].as_f64().unwrap();
    assert!((gap - (1.0 - std::f64::consts::FRAC_PI_4.cos())).abs() < 1e-9, "{gap}");
    assert!(report["t90"].is_number());
    assert_eq!(report["curve_file"], "original_rwc_undirected_curve.csv");
}

#[test]
fn trapped_walk_is_not_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "trap.csv", "layer,source,target,flow\n0,a,c,1\n0,b,c,1\n");
    let out = dir.path().join("out");
    let o = muxnav(&["navigability", "--input", &input, "--directed", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("not reached"));
    let report = json(&out.join("navigability/original_rwc_directed.json"));
    assert_eq!(report["t90"], "not reached");
}

#[test]
fn variants_produce_a_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "path.csv", "layer,source,target,flow\n0,a,b,1\n0,b,c,1\n0,c,d,1\n");
    let ring = write(dir.path(), "ring.csv", "layer,source,target,flow\n0,a,b,1\n0,b,c,1\n0,c,d,1\n0,d,a,1\n");
    let out = dir.path().join("out");
    let o = muxnav(&[
        "navigability",
        "--input",
        &path,
        "--variant",
        &format!("path={path}"),
        "--variant",
        &format!("ring={ring}"),
        "--strategy",
        "rwc,pagerank",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("navigability/comparison_rwc_undirected.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(out.join("navigability/comparison_pagerank_undirected.csv").exists());
}

#[test]
fn predict_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let toy = toy_path();
    let o = muxnav(&["predict", "--input", toy.to_str().unwrap(), "--stages", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());

    let loaded = load_edges(&[toy]).unwrap();
    let net = muxnav::build_multiplex(loaded.nodes.clone(), &loaded.edges, loaded.n_layers, false, 1.0).unwrap();
    let mut rows = 0;
    for a in STAGE_ALGORITHMS {
        let n = run_stage(&net, 1, a, 0.5).unwrap().len();
        assert!(stdout(&o).contains(&format!("{a} {n}")), "{}", stdout(&o));
        rows += n;
    }
    let file = fs::read_to_string(out.join("links_stage1.csv")).unwrap();
    assert_eq!(file.lines().count(), rows + 1);
}

#[test]
fn pipeline_reports_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let toy = toy_path();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = muxnav(&[
            "pipeline",
            "--input",
            toy.to_str().unwrap(),
            "--strategy",
            "rwc,rwd",
            "--stages",
            "1,2,3",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        json(&out.join("manifest.json"))
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a["artifacts"], b["artifacts"]);
    let reports = a["artifacts"].as_array().unwrap().iter().filter(|x| x["kind"] == "report").count();
    assert_eq!(reports, 8);
}

#[test]
fn scenario_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let base = write(
        dir.path(),
        "base.csv",
        "layer,source,target,flow\n0,a,b,1\n0,b,c,1\n0,c,d,1\n0,d,e,1\n0,e,a,1\n",
    );
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = muxnav(&[
            "scenario", "--input", &base, "--fraction", "0.4", "--layers", "4", "--seed", seed, "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        fs::read(out.join("scenario.csv")).unwrap()
    };
    assert_eq!(run("a", "3"), run("b", "3"));
    let text = String::from_utf8(run("c", "3")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.split(',').next().unwrap().parse::<usize>().unwrap() < 4));
}
