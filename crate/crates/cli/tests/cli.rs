use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const INSTANCE_A: &str =
    "tree 3\nedge 0 1 3\nedge 1 2 4\npoints 3\npoint 0 v 0 0.5\npoint 1 v 1 0.5\npoint 2 v 2 1.0\n";

fn stree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stree")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn threshold_and_expectation_on_instance_a() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.tree", INSTANCE_A);
    let a = a.to_str().unwrap();
    let o = stree(&["scp", "threshold", "--input", a, "--ell", "3.5"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "0.5\n");
    for algo in ["cubic", "quadratic", "chain"] {
        let o = stree(&["scp", "threshold", "--input", a, "--ell", "5", "--algo", algo]);
        assert_eq!(stdout(&o), "0.25\n");
    }
    assert_eq!(stdout(&stree(&["scp", "expect", "--input", a, "--exact"])), "3.5\n");
    let o = stree(&["--json", "scp", "expect", "--input", a, "--epsilon", "0.01"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let e = v["value"].as_f64().unwrap();
    assert!(e <= 3.5 && 3.5 <= 1.01 * e);
    assert!(v["queries"].as_u64().unwrap() <= v["query_bound"].as_u64().unwrap());
}

#[test]
fn lvd_build_query_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.tree", INSTANCE_A);
    let out = dir.path().join("a.lvd");
    let o = stree(&["lvd", "build", "--input", a.to_str().unwrap(), "--k", "1", "--output", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let l = out.to_str().unwrap();
    let q = |edge: &str, delta: &str| stdout(&stree(&["lvd", "query", "--lvd", l, "--edge", edge, "--delta", delta]));
    assert_eq!(q("0", "1.0"), "0\n");
    assert_eq!(q("0", "1.5"), "0\n");
    assert_eq!(q("0", "2"), "1\n");
    assert_eq!(q("1", "4.0"), "2\n");

    let o = stree(&["--json", "lvd", "stats", "--input", a.to_str().unwrap(), "--k", "1"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cells"], 3);
    assert_eq!(v["xi"], 4);
    assert_eq!(v["cell_bound_holds"], true);
}

#[test]
fn metric_expectation() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.metric", "metric 3\n0 1 1\n1 0 1\n1 1 0\nprobs 1 1 1\n");
    let o = stree(&["scp", "expect-metric", "--input", m.to_str().unwrap(), "--epsilon", "0.1"]);
    assert_eq!(stdout(&o), "1\n");
    let bad = write(dir.path(), "bad.metric", "metric 3\n0 5 1\n5 0 1\n1 1 0\nprobs 1 1 1\n");
    let o = stree(&["scp", "expect-metric", "--input", bad.to_str().unwrap(), "--epsilon", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("triangle"));
}

#[test]
fn gen_reduce_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.tree");
    let o = stree(&["gen", "--t", "8", "--n", "6", "--seed", "3", "--prob-model", "fixed:0.5", "--output", g.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(&g).unwrap();
    assert!(text.starts_with("tree 8\n"));
    let o = stree(&["reduce", "--input", g.to_str().unwrap(), "--dump"]);
    assert!(stdout(&o).contains("# backmap"));
    let o = stree(&["validate", "--seeds", "4"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 5);
    let o = stree(&["validate", "--input", g.to_str().unwrap()]);
    assert!(o.status.success());
}

#[test]
fn bench_emits_csv() {
    let o = stree(&["bench", "--sizes", "40", "--t", "5"]);
    let s = stdout(&o);
    let mut lines = s.lines();
    assert_eq!(lines.next(), Some("n,t,algo,seconds"));
    assert_eq!(lines.count(), 6);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.tree", INSTANCE_A);
    let a = a.to_str().unwrap();
    assert_eq!(stree(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(stree(&["scp", "threshold", "--input", a]).status.code(), Some(2));
    assert_eq!(stree(&["scp", "threshold", "--input", a, "--ell", "1", "--bogus"]).status.code(), Some(2));
    let o = stree(&["scp", "threshold", "--input", a, "--ell", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--ell"));
    assert_eq!(stree(&["scp", "threshold", "--input", "/nonexistent", "--ell", "1"]).status.code(), Some(1));
    let bad = write(dir.path(), "bad.tree", "tree 2\nedge 0 1 -1\npoints 0\n");
    let o = stree(&["scp", "expect", "--input", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(stree(&["lvd", "stats", "--input", a, "--k", "4"]).status.code(), Some(1));
}
