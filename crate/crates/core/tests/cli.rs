//! Command-line front end.

use std::fs;
use std::process::{Command, Output};

fn dpsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpsynth")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn bounds_prints_one_csv_row() {
    let o = dpsynth(&["bounds", "--n", "10000", "--l", "1", "--epsilon", "1", "--lipschitz", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("n,l,epsilon,a,b,c,lipschitz,upper_squared"));
    assert!(lines[1].contains("4.68269438e-4"));
}

#[test]
fn csv_release_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    fs::write(p("ratings.csv"), "rating\n1\n5\n3\n4\n2\n5\n").unwrap();
    fs::write(
        p("schema.json"),
        r#"{"columns":[{"name":"rating","values":["1","2","3","4","5"]}],"header":true}"#,
    )
    .unwrap();
    fs::write(p("query.json"), r#"{"type":"predicate","conjuncts":[2]}"#).unwrap();
    let release = |out: &str| {
        let o = dpsynth(&[
            "release", "--input", &p("ratings.csv"), "--schema", &p("schema.json"), "--epsilon", "2", "--seed", "4",
            "--output", &p(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(p(out)).unwrap()
    };
    let a = release("a.txt");
    assert_eq!(a, release("b.txt"));
    assert!(a.starts_with("# dpsynth database l=3 n=6\n"));
    let o = dpsynth(&["estimate", "--synthetic", &p("a.txt"), "--query", &p("query.json"), "--epsilon", "2", "--proper"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((0.0..=1.0).contains(&v));
}

#[test]
fn graph_cut_answer() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("edges.txt");
    let cut = dir.path().join("cut.txt");
    fs::write(&edges, "0 1\n1 2\n2 3\n3 0\n").unwrap();
    fs::write(&cut, "0 2\n1 3\n").unwrap();
    let o = dpsynth(&[
        "graph-cut", "--edges", edges.to_str().unwrap(), "--cut", cut.to_str().unwrap(), "--epsilon", "1",
        "--show-truth",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let (answer, truth) = text.trim().split_once(',').unwrap();
    assert!(answer.parse::<f64>().unwrap().is_finite());
    assert_eq!(truth, "4");
}

#[test]
fn errors_report_category_and_exit_code() {
    let o = dpsynth(&["estimate", "--synthetic", "/nonexistent", "--query", "/nonexistent", "--epsilon", "1"]);
    assert_eq!(o.status.code(), Some(10));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[io]:"));

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"experiment":"heterogeneity","query_count":0}"#).unwrap();
    let o = dpsynth(&["experiment", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(9));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[config]:"));

    let o = dpsynth(&["bounds", "--n", "100", "--l", "1", "--epsilon=-1"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[invalid-parameter]:"));
}

#[test]
fn verify_reports_every_check() {
    let o = dpsynth(&["verify", "--seed", "1"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(text.lines().count() >= 8);
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}
