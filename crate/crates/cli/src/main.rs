use anyhow::Context;
use clap::{Parser, Subcommand};
use condlab::conductance::builtin_names;
use condlab::experiment::{self, ExperimentConfig, RunReport, ENV_SEED, ENV_WORKERS, KINDS};
use condlab::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Experiments on symmetric Markov chains with unbounded-range conductances.
#[derive(Parser)]
#[command(name = "condlab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a config; exit status 0 iff every check passes.
    Run {
        config: PathBuf,
        #[command(flatten)]
        over: Overrides,
    },
    /// Run a config and freeze the named checks into a regression file.
    Freeze {
        config: PathBuf,
        /// Check ids to freeze (comma separated or repeated).
        #[arg(long, required = true, value_delimiter = ',', num_args = 1..)]
        checks: Vec<String>,
        /// Where to write the freeze file (default: <output dir>/freeze.json).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Relative tolerance stored with each frozen value.
        #[arg(long, default_value_t = 1e-6)]
        rel_tol: f64,
        #[command(flatten)]
        over: Overrides,
    },
    /// List builtin conductance models and experiment kinds.
    ListBuiltins,
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

#[derive(clap::Args)]
struct Overrides {
    /// Worker threads.
    #[arg(long, env = ENV_WORKERS)]
    workers: Option<usize>,
    /// Base seed (replaces the config's).
    #[arg(long, env = ENV_SEED)]
    seed: Option<u64>,
    /// Output directory (replaces the config's).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn load(path: &Path, over: Option<&Overrides>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(o) = over {
        cfg.workers = o.workers.or(cfg.workers);
        cfg.seed = o.seed.unwrap_or(cfg.seed);
        if let Some(d) = &o.out_dir {
            cfg.output.dir = Some(std::path::absolute(d)?);
        }
    }
    Ok(cfg)
}

fn base(path: &Path) -> Option<&Path> {
    path.parent().filter(|p| !p.as_os_str().is_empty())
}

/// Distinct exit codes: 2 unparsable config or unknown kind, 3 invalid parameters,
/// 4 budget exceeded, 5 anything else.
fn code(e: &Error) -> u8 {
    match e {
        Error::TomlDe(_) => 2,
        Error::Config(_) | Error::Constraint(_) | Error::UnknownCheck(_) | Error::Freeze(_) => 3,
        Error::SizeExceeded { .. } | Error::WindowTooSmall { .. } | Error::DefectTooLarge { .. } => 4,
        _ => 5,
    }
}

fn summarize(r: &RunReport) {
    for c in &r.checks {
        println!("{} {} value={:e} threshold={:e} {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.value, c.threshold, c.detail);
    }
    for g in &r.regressions {
        println!("{} regression {} frozen={:e} value={:?}", if g.passed { "PASS" } else { "FAIL" }, g.check_id, g.frozen_value, g.value);
    }
    if let Some(e) = &r.error {
        println!("ERROR {e}");
    }
    println!("{}: {} ({:.1}s)", r.name, if r.passed { "passed" } else { "FAILED" }, r.wall_clock_s);
}

fn real_main() -> Result<ExitCode, Error> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { config, over } => {
            let cfg = load(&config, Some(&over))?;
            let r = experiment::run(&cfg, base(&config))?;
            summarize(&r);
            Ok(if r.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Cmd::Freeze { config, checks, out, rel_tol, over } => {
            let cfg = load(&config, Some(&over))?;
            let b = base(&config);
            let (r, file) = experiment::freeze(&cfg, b, &checks, rel_tol)?;
            summarize(&r);
            let dest = out.unwrap_or_else(|| {
                let d = cfg.output_dir();
                match b {
                    Some(b) if d.is_relative() => b.join(d),
                    _ => d,
                }
                .join("freeze.json")
            });
            std::fs::write(&dest, file.to_json()?)?;
            println!("froze {} checks to {}", file.entries.len(), dest.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::ListBuiltins => {
            println!("models:");
            for (name, help) in builtin_names() {
                println!("  {name:<28} {help}");
            }
            println!("experiment kinds:");
            for (name, help) in KINDS {
                println!("  {name:<28} {help}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Validate { config } => {
            let cfg = load(&config, None)?;
            cfg.validate()?;
            println!("{}: valid {} config (digest {})", cfg.name, cfg.experiment.kind(), cfg.digest()?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match real_main().context("condlab") {
        Ok(c) => c,
        Err(e) => {
            let c = e.downcast_ref::<Error>().map_or(5, code);
            eprintln!("error: {e:#}");
            ExitCode::from(c)
        }
    }
}
