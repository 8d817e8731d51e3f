#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mdlood"));
    cmd.env_remove("MDLOOD_THREADS");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn mdlood")
}

/// Runs and asserts success, returning stdout.
pub fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "mdlood {args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        Self {
            dir: tempfile::tempdir().expect("temp dir"),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn synth(&self, name: &str, model: &str, rows: usize, seed: u64, shift: Option<&str>) -> PathBuf {
        let out = self.path(name);
        let rows = rows.to_string();
        let seed = seed.to_string();
        let mut args = vec!["synth", "--model", model, "--rows", &rows, "--out", s(&out), "--seed", &seed];
        if let Some(shift) = shift {
            args.extend(["--shift", shift, "--shift-seed", "1"]);
        }
        ok(&args);
        out
    }

    pub fn train(&self, latents: &Path, residuals: &Path) -> (PathBuf, String) {
        let det = self.path("detector.json");
        let stdout = ok(&["train", "--latents", s(latents), "--residuals", s(residuals), "--out", s(&det)]);
        (det, stdout)
    }
}
