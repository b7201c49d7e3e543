use std::process::{Command, Output};

fn amf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amf")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn verify_reports_residuals() {
    let out = amf(&["verify", "--scheme", "amf1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("iter 1: (A-T)c"));
    assert!(text.contains("max residual"));
}

#[test]
fn stability_scan_prints_verdict() {
    let out = amf(&["stability", "--scheme", "amf2", "--d", "3", "--theta", "0.5235988"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("stable within 1+1e-12: yes"));
    assert!(text.contains("per-ray maxima:"));
}

#[test]
fn converge_markdown_table() {
    let out = amf(&["converge", "--dim", "2", "--beta", "0", "--scheme", "amf1", "--grids", "24,48", "--format", "md"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("| 1/24 |"));
    assert!(text.contains("3.76 (2.00)"));
    assert!(text.contains("4.36 (--)"));
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    let args = ["converge", "--dim", "2", "--beta", "1", "--scheme", "amf2", "--grids", "8,16"];
    let printed = amf(&args);
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path.to_str().unwrap()]);
    let written = amf(&with_out);
    assert_eq!(written.status.code(), Some(0));
    assert!(written.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), printed.stdout);
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "dim = 2\nbeta = 0\nscheme = amf1\nn = 8\n").unwrap();
    let out = amf(&["integrate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("delta2:"));
}

#[test]
fn exit_codes() {
    assert_eq!(amf(&[]).status.code(), Some(2));
    assert_eq!(amf(&["verify", "--scheme", "rk4"]).status.code(), Some(2));
    assert_eq!(
        amf(&["converge", "--dim", "2", "--beta", "0", "--scheme", "amf1", "--grids", "24", "--eps", "-1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        amf(&["integrate", "--dim", "2", "--beta", "0", "--scheme", "amf2", "--n", "8", "--tau-ratio", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(amf(&["--help"]).status.code(), Some(0));
}
