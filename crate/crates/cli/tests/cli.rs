use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn seqdecode(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqdecode"))
        .args(args)
        .current_dir(dir)
        .env_remove("SEQDECODE_MAX_DIM")
        .env_remove("SEQDECODE_MAX_DENSE_DIM")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

const SMALL: &str = "channels = [\"pure_pair:0.7071067811865476\"]\nn = [4]\nrates = [0.25]\ndeltas = [0.3]\ntrials = 500\n";

#[test]
fn capacity_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = seqdecode(&["capacity"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().starts_with("channel,"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn simulate_writes_reproducible_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    for name in ["a.csv", "b.csv"] {
        let out = seqdecode(
            &["simulate", "--config", &cfg, "--out", name, "--jobs", "2"],
            dir.path(),
        );
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 4);
}

#[test]
fn seed_flag_changes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let a = seqdecode(&["simulate", "--config", &cfg, "--seed", "1"], dir.path()).stdout;
    let b = seqdecode(&["simulate", "--config", &cfg, "--seed", "2"], dir.path()).stdout;
    assert_ne!(a, b);
}

#[test]
fn report_format_is_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = seqdecode(
        &["compare", "--config", &cfg, "--format", "report"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.trim_start().starts_with('{'));
    assert!(text.contains("\"command\": \"compare\""));
}

#[test]
fn verify_passes_on_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "v.toml",
        "n = [3, 4]\ndeltas = [0.3]\nrates = [0.5]\nm_max = 8\n",
    );
    let out = seqdecode(&["verify", "--config", &cfg], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(!String::from_utf8(out.stdout).unwrap().contains(",fail,"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "trails = 10\n");
    assert_eq!(
        seqdecode(&["simulate", "--config", &bad], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        seqdecode(&["simulate", "--config", "missing.toml"], dir.path())
            .status
            .code(),
        Some(1)
    );
    let channel = write(
        dir.path(),
        "ch.toml",
        "builtin = \"trine\"\npriors = [1.0]\n",
    );
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!("channel_files = [\"{channel}\"]\n"),
    );
    assert_eq!(
        seqdecode(&["capacity", "--config", &cfg], dir.path())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn budget_override_exits_two_when_nothing_fits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_seqdecode"))
        .args(["simulate", "--config", &cfg])
        .current_dir(dir.path())
        .env("SEQDECODE_MAX_DIM", "8")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("budget"));
    let bad = Command::new(env!("CARGO_BIN_EXE_seqdecode"))
        .args(["capacity"])
        .env("SEQDECODE_MAX_DIM", "lots")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn channel_files_resolve_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("conf")).unwrap();
    write(
        &dir.path().join("conf"),
        "flip.toml",
        "letter_dim = 2\npriors = [0.5, 0.5]\n[[outputs]]\nre = [[1.0, 0.0], [0.0, 0.0]]\n[[outputs]]\nre = [[0.0, 0.0], [0.0, 1.0]]\n",
    );
    write(
        &dir.path().join("conf"),
        "exp.toml",
        "channel_files = [\"flip.toml\"]\n",
    );
    let out = seqdecode(&["capacity", "--config", "conf/exp.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("flip,"), "{text}");
}
