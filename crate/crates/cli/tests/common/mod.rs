#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_costregime"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// Synthetic preset data under `dir/gen`.
pub fn generated(dir: &Path, n: usize, seed: u64) -> (PathBuf, PathBuf, PathBuf) {
    let gen = dir.join("gen");
    let out = run(&["gen-synthetic", "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", p(&gen)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    (gen.join("data.csv"), gen.join("costs.json"), gen.join("truth.json"))
}
