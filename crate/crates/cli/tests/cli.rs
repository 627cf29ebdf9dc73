use std::fs;
use std::path::Path;
use std::process::Command;

use krflab_cli::Summary;

fn krflab(out: &Path, args: &[&str]) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_krflab")).args(args).arg("--quiet").arg("--out").arg(out).status().unwrap();
    status.code().unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

const SMALL_WEIGHTED: [&str; 8] = ["--set", "pair_budget=50", "--set", "span=64", "--set", "radii=40", "--seed", "3"];

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        assert_eq!(krflab(dir.path(), &["series"]), 0);
        let mut args = vec!["verify", "lemma4"];
        args.extend(SMALL_WEIGHTED);
        krflab(dir.path(), &args);
        assert_eq!(krflab(dir.path(), &["evolve", "--T", "100", "--t-end", "200", "--nodes", "128", "--set", "dt_ratio=0.01"]), 0);
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.len(), 7);
    assert_eq!(fa, fb);
}

#[test]
fn summary_round_trips_and_csv_is_plain() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(krflab(dir.path(), &["verify", "lemma1", "--b", "2"]), 0);
    let text = fs::read_to_string(dir.path().join("lemma1.json")).unwrap();
    let s: Summary = serde_json::from_str(&text).unwrap();
    assert_eq!(s.command, "lemma1");
    assert_eq!(s.config_echo.b, 2.0);
    assert!(s.all_pass() && s.pass_flags.len() == 3);
    assert_eq!(serde_json::to_string_pretty(&s).unwrap() + "\n", text);
    let csv = fs::read_to_string(dir.path().join("lemma1_coefficients.csv")).unwrap();
    assert!(!csv.contains('\r'));
    assert_eq!(csv.lines().next().unwrap(), "j,fitted,expected,relative_error");
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, "# test\nb = 1.5\nk = 2\n").unwrap();
    let out =
        Command::new(env!("CARGO_BIN_EXE_krflab")).args(["series", "--print-config", "--k", "3", "--config"]).arg(&path).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("b = 1.5\n") && text.contains("k = 3\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(krflab(dir.path(), &["series", "--set", "a=0.7"]), 2);
    assert_eq!(krflab(dir.path(), &["series", "--set", "unknown=1"]), 2);
    // a zero tolerance cannot be met by fitted coefficients
    assert_eq!(krflab(dir.path(), &["verify", "lemma1", "--set", "lemma1_tol=1e-300"]), 1);
}
