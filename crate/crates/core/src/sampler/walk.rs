use super::JumpSampler;
use crate::conductance::ConductanceModel;
use crate::error::{Error, Result};
use crate::lattice::Site;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::io::Write;

/// Independent stream for path `path` under base seed `seed`.
pub fn stream(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Holding-time mechanism.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    /// Unit time steps (`X`).
    Discrete,
    /// Exponential holding with rate `ν_x` (`Y`).
    Rate,
    /// Exponential holding with rate 1 (`Y^ν`).
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "snake_case")]
pub enum ProcessKind {
    Discrete,
    Continuous,
    ContinuousUnit,
    /// `Z^(n)_t = n^{-1/2} Y_{nt}`.
    Rescaled { n: u64 },
    /// `W^(n)_t = n^{-1/2} X_{[nt]}`.
    DiscreteRescaled { n: u64 },
}

impl ProcessKind {
    pub fn clock(&self) -> Clock {
        match self {
            ProcessKind::Discrete | ProcessKind::DiscreteRescaled { .. } => Clock::Discrete,
            ProcessKind::Continuous | ProcessKind::Rescaled { .. } => Clock::Rate,
            ProcessKind::ContinuousUnit => Clock::Unit,
        }
    }

    /// `(time factor, space factor)`: underlying time is `factor · t`, reported sites are
    /// divided by the space factor.
    pub fn scaling(&self) -> (f64, f64) {
        match self {
            ProcessKind::Rescaled { n } | ProcessKind::DiscreteRescaled { n } => (*n as f64, (*n as f64).sqrt()),
            _ => (1.0, 1.0),
        }
    }

    /// Underlying horizon for a horizon `t` in the process's own time.
    pub fn underlying_horizon(&self, t: f64) -> f64 {
        let h = self.scaling().0 * t;
        if self.clock() == Clock::Discrete {
            h.floor()
        } else {
            h
        }
    }
}

#[derive(Clone, Debug)]
pub enum StopRule {
    /// Run to the horizon.
    Fixed,
    /// Stop on leaving the open ball `B(center, radius)`.
    ExitBall { center: Site, radius: f64 },
    /// Stop on entering the set.
    Hit(HashSet<Site>),
    /// Whichever comes first.
    HitOrExit { targets: HashSet<Site>, center: Site, radius: f64 },
}

impl StopRule {
    #[inline]
    pub fn done(&self, x: &Site) -> bool {
        match self {
            StopRule::Fixed => false,
            StopRule::ExitBall { center, radius } => !crate::lattice::within_open((*x - *center).norm2(), *radius),
            StopRule::Hit(s) => s.contains(x),
            StopRule::HitOrExit { targets, center, radius } => {
                targets.contains(x) || !crate::lattice::within_open((*x - *center).norm2(), *radius)
            }
        }
    }
}

/// Path events in underlying (unscaled) time.
#[derive(Clone, Copy, Debug)]
pub enum Event {
    /// The path sat at `site` for `duration` (clipped at the horizon).
    Hold { site: Site, start: f64, duration: f64 },
    Jump { time: f64, from: Site, to: Site },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathEnd {
    pub site: Site,
    /// Stopping time, or the horizon.
    pub time: f64,
    pub jumps: u64,
    /// True if the stop rule (or the observer) ended the path before the horizon.
    pub stopped: bool,
}

/// Runs one path. The observer may end the path early by returning `false`.
pub fn walk<R: Rng + ?Sized>(
    sampler: &JumpSampler,
    clock: Clock,
    start: Site,
    horizon: f64,
    stop: &StopRule,
    rng: &mut R,
    mut observe: impl FnMut(Event) -> bool,
) -> PathEnd {
    let mut x = start;
    let mut t = 0.0;
    let mut jumps = 0u64;
    if stop.done(&x) {
        return PathEnd { site: x, time: 0.0, jumps, stopped: true };
    }
    loop {
        let hold = match clock {
            Clock::Discrete => 1.0,
            Clock::Rate => {
                let e: f64 = rng.sample(Exp1);
                e / sampler.nu(&x)
            }
            Clock::Unit => rng.sample(Exp1),
        };
        if t + hold > horizon {
            observe(Event::Hold { site: x, start: t, duration: horizon - t });
            return PathEnd { site: x, time: horizon, jumps, stopped: false };
        }
        let go_on = observe(Event::Hold { site: x, start: t, duration: hold });
        t += hold;
        let y = x + sampler.sample(&x, rng);
        let go_on = go_on & observe(Event::Jump { time: t, from: x, to: y });
        x = y;
        jumps += 1;
        if !go_on || stop.done(&x) {
            return PathEnd { site: x, time: t, jumps, stopped: true };
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateOptions {
    /// Bound on the deleted jump rate.
    pub tol: f64,
    /// Fixed truncation radius instead of the one derived from `tol`.
    pub radius: Option<f64>,
    /// Accept a radius whose certified defect exceeds `tol`.
    pub allow_defect: bool,
    pub log_events: bool,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions { tol: 1e-9, radius: None, allow_defect: false, log_events: false }
    }
}

/// A batch of independent paths from one start point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub model: String,
    pub kind: ProcessKind,
    pub seed: u64,
    pub start: Site,
    /// Horizon in the process's own time.
    pub horizon: f64,
    pub ends: Vec<PathEnd>,
    /// Per-path `(underlying time, site)` after every jump, starting with `(0, start)`.
    pub logs: Option<Vec<Vec<(f64, Site)>>>,
    pub defect: f64,
    pub r_star: f64,
    dim: usize,
}

impl PathEnsemble {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    /// Final positions in the process's own spatial scale.
    pub fn positions(&self) -> Vec<Vec<f64>> {
        let s = self.kind.scaling().1;
        self.ends.iter().map(|e| e.site.to_f64(self.dim).into_iter().map(|c| c / s).collect()).collect()
    }

    /// SHA-256 over the raw end states, for reproducibility checks.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.ends {
            for c in e.site.0 {
                h.update(c.to_le_bytes());
            }
            h.update(e.time.to_bits().to_le_bytes());
            h.update(e.jumps.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Event log as CSV `path_id, time, x1..xd`; times are in the process's own units.
    pub fn write_log<W: Write>(&self, w: W) -> Result<()> {
        let logs = self.logs.as_ref().ok_or_else(|| Error::Constraint("ensemble was simulated without event logs".into()))?;
        let tf = self.kind.scaling().0;
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["path_id".to_string(), "time".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        wtr.write_record(&header)?;
        for (p, log) in logs.iter().enumerate() {
            for (t, s) in log {
                let mut rec = vec![p.to_string(), format!("{}", t / tf)];
                rec.extend(s.coords(self.dim).iter().map(|c| c.to_string()));
                wtr.write_record(&rec)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn sampler_for(model: &ConductanceModel, opts: &SimulateOptions) -> Result<JumpSampler> {
    match opts.radius {
        None => JumpSampler::new(model, opts.tol),
        Some(r) => {
            let defect = model.tail_bound(r);
            if defect > opts.tol && !opts.allow_defect {
                return Err(Error::DefectTooLarge { defect, tol: opts.tol });
            }
            JumpSampler::with_radius(model, r)
        }
    }
}

/// Independent paths of `kind` from `start` up to `horizon` (in the process's own time).
pub fn simulate(
    kind: ProcessKind,
    model: &ConductanceModel,
    start: Site,
    horizon: f64,
    n_paths: usize,
    seed: u64,
    opts: &SimulateOptions,
) -> Result<PathEnsemble> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Constraint(format!("horizon must be finite and nonnegative, got {horizon}")));
    }
    let sampler = sampler_for(model, opts)?;
    let h = kind.underlying_horizon(horizon);
    let clock = kind.clock();
    let runs: Vec<(PathEnd, Option<Vec<(f64, Site)>>)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream(seed, p);
            if opts.log_events {
                let mut log = vec![(0.0, start)];
                let end = walk(&sampler, clock, start, h, &StopRule::Fixed, &mut rng, |e| {
                    if let Event::Jump { time, to, .. } = e {
                        log.push((time, to));
                    }
                    true
                });
                (end, Some(log))
            } else {
                (walk(&sampler, clock, start, h, &StopRule::Fixed, &mut rng, |_| true), None)
            }
        })
        .collect();
    let (ends, logs): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    Ok(PathEnsemble {
        model: model.name().to_string(),
        kind,
        seed,
        start,
        horizon,
        ends,
        logs: if opts.log_events { Some(logs.into_iter().map(|l| l.unwrap_or_default()).collect()) } else { None },
        defect: sampler.defect(),
        r_star: sampler.r_star(),
        dim: model.dim(),
    })
}
