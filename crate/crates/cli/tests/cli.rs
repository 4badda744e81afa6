use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn treeswarm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treeswarm")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const STAR6: &str = "n=6\n1 2\n1 3\n1 4\n1 5\n1 6\n";
const PATH6: &str = "n=6\n1 2\n2 3\n3 4\n4 5\n5 6\n";

#[test]
fn plan_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let star = write(dir.path(), "star.txt", STAR6);
    let path = write(dir.path(), "path.txt", PATH6);
    let plan = dir.path().join("plan.txt");
    let o = treeswarm(&["plan", &star, &path, "-o", plan.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = treeswarm(&["replay", plan.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("target reached"));
}

#[test]
fn identical_trees_give_an_empty_plan() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.txt", PATH6);
    let o = treeswarm(&["plan", &a, &a]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("0 steps"));
}

#[test]
fn mismatched_sizes_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.txt", PATH6);
    let b = write(dir.path(), "b.txt", "n=3\n1 2\n2 3\n");
    assert_ne!(code(&treeswarm(&["plan", &a, &b])), 0);
}

#[test]
fn audit_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let clean = write(dir.path(), "clean.log", "n=3\n1 2\n2 3\nevents\nround 1\nmsg 1 2 ViewShare\n");
    assert_eq!(code(&treeswarm(&["audit", &clean])), 0);
    let empty = write(dir.path(), "empty.log", "n=2\n1 2\nevents\n");
    assert_eq!(code(&treeswarm(&["audit", &empty])), 0);
    let far = write(
        dir.path(),
        "far.log",
        "n=5\n1 2\n2 3\n3 4\n4 5\nevents\nround 1\ncommit LT 1 2 3 | -1-2 | +1-4\n",
    );
    let o = treeswarm(&["audit", &far]);
    assert_eq!(code(&o), 1);
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().filter(|l| l.starts_with("line ")).count(), 1);
    let garbage = write(dir.path(), "bad.log", "not a log\n");
    assert_eq!(code(&treeswarm(&["audit", &garbage])), 2);
}

#[test]
fn run_writes_artifacts_that_audit_clean() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = treeswarm(&["run", "--n", "10", "--protocol", "line", "--trials", "2", "--seed", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for t in ["trial00", "trial01"] {
        for suffix in ["_metrics.csv", "_trajectory.csv", ".svg", "_events.log"] {
            assert!(out.join(format!("{t}{suffix}")).exists(), "{t}{suffix}");
        }
    }
    assert!(out.join("summary.csv").exists());
    let log = out.join("trial00_events.log");
    assert_eq!(code(&treeswarm(&["audit", log.to_str().unwrap()])), 0);
}

#[test]
fn two_robots_succeed_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = treeswarm(&["run", "--n", "2", "--trials", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 rounds"));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write(
        dir.path(),
        "exp.toml",
        &format!("n = 9\nprotocol = \"star\"\ntrials = 1\nout = {:?}\n[range]\nmission = 0.75\n", out.to_str().unwrap()),
    );
    let o = treeswarm(&["run", "--config", &cfg, "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("n=9 star trial 0 seed 3"), "{text}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&treeswarm(&["run", "--n", "1"])), 2);
    assert_eq!(code(&treeswarm(&["run", "--protocol", "ring"])), 2);
    assert_eq!(code(&treeswarm(&["frobnicate"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "n = 5\ncolour = 3\n");
    assert_eq!(code(&treeswarm(&["run", "--config", &cfg])), 2);
}

#[test]
fn exhausted_round_budget_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = treeswarm(&["run", "--n", "30", "--trials", "1", "--max-rounds", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn single_cell_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = treeswarm(&["sweep", "--n", "8", "--protocol", "star", "--trials", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(out.join("n8_star").join("trial01.svg").exists());
}
