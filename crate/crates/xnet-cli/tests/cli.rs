//! End-to-end checks through the real binary.

use std::path::Path;
use std::process::{Command, Output};

fn xnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 output")
}

#[test]
fn outerbound_emits_the_exact_bound() {
    let out = xnet(&["outerbound", "--m", "2", "--n", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("command,config,seed,"), "{text}");
    assert!(text.contains(",4/3"), "{text}");
}

#[test]
fn identical_configs_give_identical_bytes() {
    let args = ["verify", "--m", "2", "--n", "2", "--kind", "perfect", "--seed", "7"];
    let a = xnet(&args);
    let b = xnet(&args);
    assert!(a.status.success() && b.status.success());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);

    let c = xnet(&["verify", "--m", "2", "--n", "2", "--kind", "perfect", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn structured_record_format_is_flat_key_value() {
    let out = xnet(&["build", "--m", "2", "--n", "2", "--kind", "perfect", "--format", "structured-record"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().all(|l| l.is_empty() || l.contains('=')), "{text}");
    assert!(text.contains("command=build"), "{text}");
    assert!(text.contains("dof=4/3"), "{text}");
}

#[test]
fn config_file_fills_in_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "m = 3\nn = 2\nkind = \"perfect\"\nseed = 11\n").unwrap();
    let from_file = xnet(&["build", "--config", cfg.to_str().unwrap()]);
    assert!(from_file.status.success());
    assert!(stdout(&from_file).contains("build,"), "{}", stdout(&from_file));
    assert!(stdout(&from_file).contains(",3,2,perfect"), "{}", stdout(&from_file));

    let overridden = xnet(&["build", "--config", cfg.to_str().unwrap(), "--m", "4"]);
    assert!(stdout(&overridden).contains(",4,2,perfect"), "{}", stdout(&overridden));
}

#[test]
fn invalid_config_exits_two_and_names_the_field() {
    let out = xnet(&["verify", "--m", "3", "--n", "3", "--kind", "perfect"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("field kind"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn delay_reports_the_exact_throughput() {
    let out = xnet(&["delay", "--delays", "3,4,6,8", "--horizon", "300"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("4/3"), "{text}");
    assert!(text.contains(",0\n") || text.ends_with(",0"), "{text}");
}

#[test]
fn relay_perfect_two_by_two_hits_two_thirds() {
    let out = xnet(&["relay", "--m", "2", "--k", "2", "--scheme", "perfect"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains(",2/3,2/3"), "{text}");
}

#[test]
fn output_flag_writes_the_file_instead_of_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bound.csv");
    let out = xnet(&["outerbound", "--m", "3", "--n", "3", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(Path::new(&path)).unwrap();
    assert!(written.contains("9/5"), "{written}");
}

#[test]
fn suite_prints_table_on_stderr_and_exits_nonzero_while_slope_criterion_fails() {
    let out = xnet(&["suite"]);
    assert_eq!(out.status.code(), Some(1));
    let table = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(table.lines().filter(|l| l.starts_with("criterion")).count(), 8);
    assert!(table.contains("FAIL"), "{table}");
    let records = stdout(&out);
    assert!(records.contains("suite,"), "{records}");
    assert!(records.lines().count() >= 9, "{records}");
}
