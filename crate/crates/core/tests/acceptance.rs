//! Acceptance suite: one shipped config per criterion, one PASS/FAIL line each.
//!
//! `cargo test -p condlab-core --test acceptance -- --nocapture` prints the table.
//! `CONDLAB_ACCEPTANCE=4,10` restricts the run to the listed criteria.

use condlab::experiment::{run, ExperimentConfig};
use std::path::{Path, PathBuf};

const CRITERIA: [(u32, &str); 12] = [
    (1, "exact identities"),
    (2, "closed-form oracles"),
    (3, "homogenized coefficients"),
    (4, "on-diagonal upper bound"),
    (5, "near-diagonal lower bound"),
    (6, "exit probabilities"),
    (7, "Levy system"),
    (8, "jump tightness"),
    (9, "central limit theorem"),
    (10, "Harnack contrast"),
    (11, "weighted Poincare"),
    (12, "truncated kernel"),
];

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance")
}

fn config_for(n: u32) -> PathBuf {
    let prefix = format!("{n:02}-");
    let mut hits: Vec<PathBuf> = std::fs::read_dir(config_dir())
        .expect("configs/acceptance")
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(&prefix))
        .collect();
    assert_eq!(hits.len(), 1, "criterion {n} needs exactly one config, found {hits:?}");
    hits.pop().unwrap()
}

fn selected() -> Vec<u32> {
    match std::env::var("CONDLAB_ACCEPTANCE") {
        Ok(s) if !s.trim().is_empty() => s.split(',').map(|v| v.trim().parse().expect("criterion number")).collect(),
        _ => CRITERIA.iter().map(|c| c.0).collect(),
    }
}

#[test]
fn every_criterion_has_one_config() {
    for (n, _) in CRITERIA {
        let cfg = ExperimentConfig::load(&config_for(n)).unwrap();
        cfg.validate().unwrap();
    }
}

#[test]
fn acceptance() {
    let scratch = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    for n in selected() {
        let (_, title) = CRITERIA.iter().find(|c| c.0 == n).expect("unknown criterion");
        let path = config_for(n);
        let mut cfg = ExperimentConfig::load(&path).unwrap();
        cfg.output.dir = Some(scratch.path().join(&cfg.name));
        let report = run(&cfg, Some(&config_dir())).unwrap();
        let status = if report.passed { "PASS" } else { "FAIL" };
        let mut line = format!(
            "{status} criterion {n:>2} {title:<26} {} checks, {:.1}s",
            report.checks.len(),
            report.wall_clock_s
        );
        for c in report.failures() {
            line += &format!("\n       {} value={:e} threshold={:e} {}", c.id, c.value, c.threshold, c.detail);
        }
        if let Some(e) = &report.error {
            line += &format!("\n       error: {e}");
        }
        println!("{line}");
        lines.push(line);
        if !report.passed {
            failed.push(n);
        }
    }
    assert!(failed.is_empty(), "failed criteria {failed:?}:\n{}", lines.join("\n"));
}
