#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_repro");

/// `repro` invoked from `cwd` with runs stored under `runs`.
pub fn repro(cwd: &Path, runs: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env("REPRO_RUNS_DIR", runs)
        .output()
        .expect("spawn repro")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn git(dir: &Path, args: &[&str]) {
    let status = Command::new("git")
        .args(args)
        .current_dir(dir)
        .env("GIT_AUTHOR_NAME", "fixture")
        .env("GIT_AUTHOR_EMAIL", "fixture@example.com")
        .env("GIT_COMMITTER_NAME", "fixture")
        .env("GIT_COMMITTER_EMAIL", "fixture@example.com")
        .output()
        .expect("spawn git");
    assert!(status.status.success(), "git {args:?}: {}", String::from_utf8_lossy(&status.stderr));
}

/// A repository with one commit of `train.py` and `README`.
pub fn fixture_repo(dir: &Path) {
    git(dir, &["init", "-q"]);
    fs::write(dir.join("train.py"), "print('train')\n").unwrap();
    fs::write(dir.join("README"), "fixture\n").unwrap();
    git(dir, &["add", "."]);
    git(dir, &["commit", "-q", "-m", "initial"]);
}

/// Run directories under `runs/<experiment>`, sorted.
pub fn run_dirs(runs: &Path, experiment: &str) -> Vec<PathBuf> {
    let Ok(entries) = fs::read_dir(runs.join(experiment)) else {
        return Vec::new();
    };
    let mut dirs: Vec<PathBuf> = entries
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    dirs
}

/// The one run directory in `after` that is not in `before`.
pub fn new_run(before: &[PathBuf], after: &[PathBuf]) -> PathBuf {
    let fresh: Vec<&PathBuf> = after.iter().filter(|d| !before.contains(d)).collect();
    assert_eq!(fresh.len(), 1, "expected one new run, got {fresh:?}");
    fresh[0].clone()
}
