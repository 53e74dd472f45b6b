use std::io::Write;
use std::process::{Command, Output};

use tempfile::NamedTempFile;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mmconverse"))
}

fn file(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const BSC: &str = "# binary symmetric, crossover 0.3\n2 2\n0.7 0.3\n0.3 0.7\n";

#[test]
fn converse_bsc_in_bits() {
    let ch = file(BSC);
    let o = bin().args(["converse", "--bits", "--rate", "1", "--channel"]).arg(ch.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.starts_with("epsilon 3.00000000000e-1\n"), "{s}");
    assert!(s.contains("status converged"));
}

#[test]
fn converse_dump_has_certificate() {
    let ch = file(BSC);
    let o = bin().args(["converse", "--rate", "0.5", "--dump-certificate", "--channel"]).arg(ch.path()).output().unwrap();
    let s = stdout(&o);
    assert!(s.contains("\nqx ") && s.contains("\nz "), "{s}");
}

#[test]
fn converse_dmc_matches_single_use() {
    let ch = file(BSC);
    let o = bin().args(["converse-dmc", "--n", "1", "--bits", "--rate-total", "1", "--channel"]).arg(ch.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("epsilon 3.00000000000e-1\n"));
    let o = bin().args(["converse-dmc", "--n", "16", "--rate-total", "2", "--channel"]).arg(ch.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("input_types 17"));
}

#[test]
fn sweep_is_reproducible() {
    let ch = file(BSC);
    let run = || {
        let o = bin()
            .args(["sweep", "--rate-min", "0", "--rate-max", "1", "--bits", "--steps", "5", "--channel"])
            .arg(ch.path())
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        stdout(&o)
    };
    let a = run();
    assert_eq!(a, run());
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "rate,epsilon,iterations,gap,status");
    assert_eq!(lines.len(), 6);
    assert!(lines[5].starts_with("6.93147180560e-1,3.00000000000e-1,"));
}

#[test]
fn sweep_to_file() {
    let ch = file(BSC);
    let out = NamedTempFile::new().unwrap();
    let o = bin()
        .args(["sweep", "--rate-min", "0", "--rate-max", "0.5", "--steps", "3", "--channel"])
        .arg(ch.path())
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
    assert_eq!(std::fs::read_to_string(out.path()).unwrap().lines().count(), 4);
}

#[test]
fn beta_from_files() {
    let p = file("1 2\n0.5 0.5\n");
    let q = file("1 2\n0.9 0.1\n");
    let o = bin().args(["beta", "--alpha", "0.5", "--p"]).arg(p.path()).arg("--q").arg(q.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("beta 1.00000000000e-1\n"));
}

#[test]
fn malformed_channel_reports_line() {
    let ch = file("2 2\n0.7 0.3\n0.3 0.6\n");
    let o = bin().args(["converse", "--rate", "0.5", "--channel"]).arg(ch.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn missing_file_and_bad_usage() {
    let o = bin().args(["converse", "--rate", "0.5", "--channel", "/nonexistent/ch.txt"]).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = bin().args(["converse", "--rate"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let ch = file(BSC);
    let o = bin().args(["converse", "--rate", "0.5", "--tol-gap", "0", "--channel"]).arg(ch.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn size_guard_exit_code() {
    let ch = file("4 4\n0.25 0.25 0.25 0.25\n0.25 0.25 0.25 0.25\n0.25 0.25 0.25 0.25\n0.25 0.25 0.25 0.25\n");
    let o = bin().args(["converse-dmc", "--n", "60", "--rate-total", "1", "--channel"]).arg(ch.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn iteration_limit_exit_code() {
    let ch = file("3 3\n0.9 0.05 0.05\n0.2 0.7 0.1\n0.05 0.15 0.8\n");
    let o = bin().args(["converse", "--rate", "0.5", "--max-iter", "1", "--channel"]).arg(ch.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(4), "{}", stdout(&o));
    assert!(stdout(&o).contains("status iteration-limit"));
}

#[test]
fn verify_passes_and_detects_faults() {
    let o = bin().args(["verify", "--seed", "3", "--cases", "10"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = bin().args(["verify", "--seed", "3", "--cases", "2", "--inject-fault"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("--seed 3 --cases 1"));
}
