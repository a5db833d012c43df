use std::path::PathBuf;
use std::process::{Command, Output};

fn dba(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dba"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("dba-{}-{name}", std::process::id()));
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn run_succeeds_and_machine_output_has_a_header() {
    let o = dba(&[
        "run",
        "--scenario",
        "all-honest",
        "--trials",
        "50",
        "--output",
        "machine",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["record"], "header");
    assert_eq!(lines[1]["record"], "batch");
    assert_eq!(lines[1]["report"]["counts"]["validity"], 50);
    assert_eq!(lines[1]["checks"][1]["name"], "validity");
}

#[test]
fn failing_check_sets_exit_status() {
    let path = temp_file(
        "forge.toml",
        "scenario = \"forge-small\"\n[sim]\nsegment_length = 6\ndistributors = 1\ntrials = 200\n\
         [adversary]\ncontrolled = [4]\nreceiver_strategy = \"forge\"\n[checks]\nagreement = true\n",
    );
    let o = dba(&["run", "--config", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("check FAIL agreement"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("check failed"));
}

#[test]
fn bad_config_is_rejected_with_the_field_name() {
    let path = temp_file("bad.toml", "[sim]\nsegment_length = 10\n");
    let o = dba(&["run", "--config", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr)
        .contains("segment_length: m must be a positive multiple of 6"));
}

#[test]
fn dumped_config_reproduces_the_run() {
    let args = [
        "--scenario",
        "forge-curve",
        "-m",
        "12",
        "--trials",
        "100",
        "--output",
        "machine",
    ];
    let dumped = dba(&[&["config"][..], &args].concat());
    assert!(dumped.status.success());
    let path = temp_file("dumped.toml", &stdout(&dumped));
    let from_file = dba(&["run", "--config", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    let direct = dba(&[&["run"][..], &args].concat());
    assert_eq!(stdout(&from_file), stdout(&direct));
}

#[test]
fn trial_dump_shows_lists_and_transcript() {
    let o = dba(&[
        "trial",
        "--scenario",
        "forging-receiver",
        "-m",
        "6",
        "--index",
        "3",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("# segment P5"));
    assert!(text.contains("# combined P1"));
    assert!(text.contains("# transcript"));
    assert!(text.lines().any(|l| l.starts_with("1 P1 P2 1:[")));
    let outcome = text.lines().last().unwrap();
    let report: serde_json::Value = serde_json::from_str(outcome).unwrap();
    assert_eq!(report["trial"], 3);
}

#[test]
fn oracle_prints_exact_values() {
    let o = dba(&["oracle", "-m", "12", "-d", "2", "--disclosed", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("exact      61/90"), "{text}");
    assert!(text.contains("method     enumeration"));
    let o = dba(&["oracle", "-m", "60", "-d", "2"]);
    assert!(stdout(&o).contains("method     closed-form"));
}

#[test]
fn scenarios_are_listed() {
    let text = stdout(&dba(&["scenarios"]));
    for name in [
        "all-honest",
        "equivocating-sender",
        "forging-receiver",
        "bribery",
        "forge-curve",
    ] {
        assert!(text.lines().any(|l| l == name), "{name}");
    }
}

#[test]
fn agreement_check_cannot_be_disabled_without_forgers() {
    let path = temp_file(
        "noagree.toml",
        "[checks]\nagreement = false\nvalidity = false\n",
    );
    let o = dba(&["run", "--config", path.to_str().unwrap(), "--trials", "20"]);
    std::fs::remove_file(&path).ok();
    assert!(o.status.success());
    assert!(stdout(&o).contains("check PASS agreement"));
    assert!(!stdout(&o).contains("check PASS validity"));
}
