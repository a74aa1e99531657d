use std::path::PathBuf;
use std::process::{Command, Output};

fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sandpile"))
        .args(args)
        .env("SANDPILE_ASSETS", assets())
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sandpile-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn classify_counts() {
    let o = run(&["--json", "catalog", "classify"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let c = &v["counts"];
    assert_eq!(c["non_spanning"], 21);
    assert_eq!(c["p_complete_timed"], 52);
    assert_eq!(c["planar_no_timed_crossover"], 99);
    assert_eq!(c["delay_issue"], 34);
    assert_eq!(c["conjectured_no_timed_crossover"], 49);
    assert_eq!(v["total"], 255);
}

#[test]
fn verify_reports_delay_and_expectation() {
    let o = run(&["verify", "131-crossover.gadget"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "verdict pass delay 14");
    assert_eq!(run(&["verify", "131-crossover.gadget", "--expect", "fail"]).status.code(), Some(1));
}

#[test]
fn simulate_zero_steps_echoes_input() {
    let text = std::fs::read_to_string(assets().join("moore-example.txt")).unwrap();
    let first: String = text.lines().filter(|l| !l.starts_with('#')).take(6).map(|l| format!("{l}\n")).collect();
    let path = scratch("frame.txt");
    std::fs::write(&path, &first).unwrap();
    let o = run(&["simulate", path.to_str().unwrap(), "--steps", "0"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), first);
}

#[test]
fn compile_then_predict() {
    let net = scratch("or.net");
    let inst = scratch("or.inst");
    std::fs::write(&net, "a=1\nb=0\ng=OR a b\nout g\n").unwrap();
    assert!(run(&["compile", net.to_str().unwrap(), "-o", inst.to_str().unwrap()]).status.success());
    let o = run(&["--json", "predict", inst.to_str().unwrap(), "--timed"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["answer"], true);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "missing.gadget"]).status.code(), Some(1));
    assert_eq!(run(&["disjointify", "151-crossover.gadget"]).status.code(), Some(1));
}
