use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const WORKED: &str = "\
fabric words=3 delay1=5 delay2=1 threshold=10
dur * 4
rehearse 1 3 2 reps=10 gap=2 rest=20 start=0
at 500 probe 1
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_learnfabric"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn learnfabric(args: &[&str], scenario: &Path) -> Output {
    bin().args(args).arg(scenario).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_worked(dir: &TempDir) -> PathBuf {
    let s = write(dir, "worked.lf", WORKED);
    let o = learnfabric(&["run"], &s);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    s
}

fn tamper(scenario: &Path, f: impl Fn(Vec<String>) -> Vec<String>) {
    let path = scenario.with_extension("trace.jsonl");
    let lines = fs::read_to_string(&path).unwrap().lines().map(String::from).collect();
    fs::write(&path, f(lines).join("\n") + "\n").unwrap();
}

#[test]
fn run_writes_trace_and_report_beside_the_scenario() {
    let dir = TempDir::new().unwrap();
    let s = run_worked(&dir);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(s.with_extension("report.json")).unwrap()).unwrap();
    assert_eq!(report["outcome"], "quiescent");
    assert_eq!(report["final_tick"], 522);
    let learned: Vec<_> = report["learned"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["pair"].clone())
        .collect();
    assert_eq!(learned, vec![serde_json::json!([1, 3]), serde_json::json!([3, 2])]);
    assert!(s.with_extension("trace.jsonl").exists());
}

#[test]
fn explicit_output_paths() {
    let dir = TempDir::new().unwrap();
    let s = write(&dir, "worked.lf", WORKED);
    let (t, r) = (dir.path().join("t.jsonl"), dir.path().join("r.json"));
    let o = bin()
        .arg("run")
        .arg(&s)
        .arg("--trace")
        .arg(&t)
        .arg("--report")
        .arg(&r)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(t.exists() && r.exists());
    let o = bin().arg("verify").arg(&s).arg(&t).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn repeated_word_in_plan_is_rejected() {
    let dir = TempDir::new().unwrap();
    let s = write(
        &dir,
        "bad.lf",
        "fabric words=3 delay1=5 delay2=1 threshold=10\ndur * 4\nrehearse 1 3 1 2 reps=10\n",
    );
    let o = learnfabric(&["run"], &s);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!s.with_extension("trace.jsonl").exists());
}

#[test]
fn cyclic_replay_without_suppression_hits_tick_limit() {
    let dir = TempDir::new().unwrap();
    let s = write(
        &dir,
        "cycle.lf",
        "fabric words=2 delay1=5 delay2=1 threshold=3\n\
         dur * 4\n\
         rehearse 1 2 reps=3 gap=1 rest=20 start=0\n\
         rehearse 2 1 reps=3 gap=1 rest=20 start=300\n\
         at 1000 probe 1\n\
         maxticks 5000\n",
    );
    let o = learnfabric(&["run"], &s);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = learnfabric(&["run", "--no-loop-suppression"], &s);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = learnfabric(&["run", "--no-loop-suppression", "--max-ticks", "2000"], &s);
    assert_eq!(o.status.code(), Some(3));
    let report = fs::read_to_string(s.with_extension("report.json")).unwrap();
    assert!(report.contains("\"tick_limit\""));
}

#[test]
fn verify_accepts_untouched_trace() {
    let dir = TempDir::new().unwrap();
    let s = run_worked(&dir);
    let o = learnfabric(&["verify"], &s);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("agree"));
}

#[test]
fn verify_names_pair_of_deleted_learned_record() {
    let dir = TempDir::new().unwrap();
    let s = run_worked(&dir);
    tamper(&s, |lines| {
        lines
            .into_iter()
            .filter(|l| !(l.contains("\"ev\":\"learned\"") && l.contains("\"pair\":[1,3]")))
            .collect()
    });
    let o = learnfabric(&["verify"], &s);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("(1,3)"), "{}", stderr(&o));
}

#[test]
fn verify_names_tick_of_shifted_auto_enable() {
    let dir = TempDir::new().unwrap();
    let s = run_worked(&dir);
    tamper(&s, |lines| {
        lines
            .into_iter()
            .map(|l| {
                if l.starts_with("{\"t\":509,") {
                    l.replacen("509", "510", 1)
                } else {
                    l
                }
            })
            .collect()
    });
    let o = learnfabric(&["verify"], &s);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("tick 510"), "{}", stderr(&o));
}

#[test]
fn verify_rejects_garbage_trace() {
    let dir = TempDir::new().unwrap();
    let s = run_worked(&dir);
    tamper(&s, |mut lines| {
        lines.push("not json".into());
        lines
    });
    assert_eq!(learnfabric(&["verify"], &s).status.code(), Some(1));
}

#[test]
fn verify_missing_trace_is_io_error() {
    let dir = TempDir::new().unwrap();
    let s = write(&dir, "worked.lf", WORKED);
    assert_eq!(learnfabric(&["verify"], &s).status.code(), Some(2));
}

#[test]
fn check_prints_canonical_form() {
    let dir = TempDir::new().unwrap();
    let s = write(&dir, "worked.lf", WORKED);
    let o = learnfabric(&["check"], &s);
    assert_eq!(o.status.code(), Some(0));
    let canonical = String::from_utf8(o.stdout).unwrap();
    assert!(canonical.starts_with("fabric words=3 delay1=5 delay2=1 threshold=10"));
    let again = write(&dir, "again.lf", &canonical);
    let o = learnfabric(&["check"], &again);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), canonical);
}

#[test]
fn check_rejects_unknown_directive_and_bad_delays() {
    let dir = TempDir::new().unwrap();
    let s = write(&dir, "a.lf", "fabric words=3 delay1=5 delay2=1 threshold=10\nfrobnicate 1\n");
    let o = learnfabric(&["check"], &s);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
    let s = write(&dir, "b.lf", "fabric words=3 delay1=5 delay2=6 threshold=10\ndur * 4\n");
    assert_eq!(learnfabric(&["check"], &s).status.code(), Some(1));
}

#[test]
fn missing_scenario_is_io_error() {
    let dir = TempDir::new().unwrap();
    let o = learnfabric(&["run"], &dir.path().join("nope.lf"));
    assert_eq!(o.status.code(), Some(2));
}
