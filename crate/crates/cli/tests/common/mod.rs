#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use plmmkit::sim::{self, Simulated};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plmmkit"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "plmmkit {args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// PLINK triplet and outcome table for `sim` under `dir`.
pub fn write_fixture(dir: &Path, sim: &Simulated) -> (PathBuf, PathBuf) {
    let prefix = dir.join("geno");
    sim::write_plink(&prefix, sim).unwrap();
    let outcome = dir.join("pheno.txt");
    sim::write_outcome(&outcome, &sim.sample_ids(), "y", &sim.y).unwrap();
    (prefix, outcome)
}

/// `process` then `design`; returns the design directory.
pub fn build_design(dir: &Path, sim: &Simulated) -> PathBuf {
    let (prefix, outcome) = write_fixture(dir, sim);
    let proc_dir = dir.join("proc");
    run_ok(&["process", "--plink", s(&prefix), "--out", s(&proc_dir)]);
    let design = dir.join("design");
    run_ok(&[
        "design",
        "--data",
        s(&proc_dir),
        "--outcome",
        s(&outcome),
        "--out",
        s(&design),
    ]);
    design
}

pub fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Distinct feature names in a `beta.sparse` file.
pub fn beta_features(text: &str) -> std::collections::BTreeSet<String> {
    text.lines()
        .filter_map(|l| l.split('\t').next())
        .map(str::to_string)
        .collect()
}

/// Writes the raw dosages of `rows` as a predict input table.
pub fn write_new_data(path: &Path, sim: &Simulated, rows: &[usize]) {
    let mut text = String::from("id");
    for j in 0..sim.p() {
        text.push('\t');
        text.push_str(&sim::variant_id(j));
    }
    text.push('\n');
    for &i in rows {
        text.push_str(&format!("new{i}"));
        for j in 0..sim.p() {
            text.push_str(&format!("\t{}", sim.genotypes[[i, j]]));
        }
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

pub fn parse_predictions(text: &str) -> Vec<(String, f64)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let (id, v) = l.split_once('\t').unwrap();
            (id.to_string(), v.parse().unwrap())
        })
        .collect()
}
