//! TOML-configured experiments: dispatch, run reports, and freeze files.

mod config;
mod report;
mod runners;

pub use config::*;
pub use report::*;

use crate::error::{Error, Result};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Environment overrides honoured by [`run`]'s callers.
pub const ENV_WORKERS: &str = "CONDLAB_WORKERS";
pub const ENV_SEED: &str = "CONDLAB_SEED";

impl ExperimentConfig {
    /// sha256 of the canonical serialization, so formatting does not matter.
    pub fn digest(&self) -> Result<String> {
        Ok(sha256_hex(self.to_toml()?.as_bytes()))
    }
}

/// Run a validated config. `base` resolves relative paths (CSV tables, freeze files,
/// a relative output directory); artifacts and `report.json` go to the output directory.
/// Errors inside the experiment are recorded in the report, not returned.
pub fn run(cfg: &ExperimentConfig, base: Option<&Path>) -> Result<RunReport> {
    cfg.validate()?;
    let digest = cfg.digest()?;
    let out = resolve(base, &cfg.output_dir());
    std::fs::create_dir_all(&out)?;
    let workers = cfg.workers.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let start = Instant::now();
    let mut ctx = runners::Ctx { seed: cfg.seed, out: out.clone(), base, checks: Vec::new(), artifacts: Vec::new() };
    let outcome = pool.install(|| runners::run_kind(&cfg.experiment, &mut ctx));
    let error = outcome.err().map(|e| e.to_string());
    let regressions = match &cfg.regression {
        Some(p) => {
            let frozen = FreezeFile::load(&resolve(base, p))?;
            let partial = RunReport { checks: ctx.checks.clone(), ..empty_report(cfg, &digest) };
            frozen.compare(&partial)
        }
        None => Vec::new(),
    };
    let passed = error.is_none()
        && !ctx.checks.is_empty()
        && ctx.checks.iter().all(|c| c.passed)
        && regressions.iter().all(|r| r.passed);
    let mut artifacts = ctx.artifacts;
    artifacts.push("report.json".into());
    let report = RunReport {
        checks: ctx.checks,
        regressions,
        error,
        passed,
        wall_clock_s: start.elapsed().as_secs_f64(),
        workers,
        artifacts,
        ..empty_report(cfg, &digest)
    };
    report.write_json(&out.join("report.json"))?;
    Ok(report)
}

fn empty_report(cfg: &ExperimentConfig, digest: &str) -> RunReport {
    RunReport {
        name: cfg.name.clone(),
        kind: cfg.experiment.kind().into(),
        config_digest: digest.into(),
        checks: Vec::new(),
        regressions: Vec::new(),
        error: None,
        passed: false,
        wall_clock_s: 0.0,
        workers: 0,
        rng: RngProvenance {
            generator: "ChaCha8".into(),
            scheme: "one stream per path (set_stream), sub-seeds mixed from the base seed".into(),
            base_seed: cfg.seed,
        },
        artifacts: Vec::new(),
    }
}

fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

/// Run `cfg` and freeze the named checks; refuses unknown or failed checks.
pub fn freeze(cfg: &ExperimentConfig, base: Option<&Path>, ids: &[String], rel_tol: f64) -> Result<(RunReport, FreezeFile)> {
    let report = run(cfg, base)?;
    let file = FreezeFile::from_report(&report, ids, rel_tol)?;
    Ok((report, file))
}
