use super::walk::{stream, walk, Clock, Event, StopRule};
use super::JumpSampler;
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::stats::{wilson, Moments};
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// A Bernoulli frequency with its normal-approximation σ and 3σ Wilson interval.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Frequency {
    pub hits: u64,
    pub n: u64,
    pub p: f64,
    pub sigma: f64,
    pub ci: (f64, f64),
}

impl Frequency {
    pub fn new(hits: u64, n: u64) -> Frequency {
        let p = hits as f64 / n.max(1) as f64;
        Frequency { hits, n, p, sigma: (p * (1.0 - p) / n.max(1) as f64).sqrt(), ci: wilson(hits, n, 3.0) }
    }
}

fn count<F: Fn(u64) -> bool + Sync>(n_paths: usize, f: F) -> Frequency {
    let hits = (0..n_paths as u64).into_par_iter().filter(|p| f(*p)).count() as u64;
    Frequency::new(hits, n_paths as u64)
}

/// Exit times `τ_{B(x, radius)} ∧ cap`, one per path.
pub fn exit_times(
    sampler: &JumpSampler,
    clock: Clock,
    x: Site,
    radius: f64,
    cap: f64,
    n_paths: usize,
    seed: u64,
) -> Vec<f64> {
    let stop = StopRule::ExitBall { center: x, radius };
    (0..n_paths as u64)
        .into_par_iter()
        .map(|p| walk(sampler, clock, x, cap, &stop, &mut stream(seed, p), |_| true).time)
        .collect()
}

/// `γ` with `P(τ < γ D²) ≈ quantile` from a sample of exit times at scale `D`.
pub fn fit_gamma(times: &[f64], scale: f64, quantile: f64) -> f64 {
    let mut t = times.to_vec();
    t.sort_by(|a, b| a.total_cmp(b));
    let k = ((quantile * t.len() as f64).floor() as usize).min(t.len() - 1);
    t[k] / (scale * scale)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExitEstimate {
    pub scale: f64,
    pub radius: f64,
    pub gamma: f64,
    /// `γ D²` in the chain's own time (steps for `X`).
    pub time_limit: f64,
    pub freq: Frequency,
}

/// Empirical `P^x(τ_{B(x, A D)} < γ D²)` for `X` (`Clock::Discrete`) or `Y` (`Clock::Rate`).
pub fn exit_statistics(
    sampler: &JumpSampler,
    clock: Clock,
    x: Site,
    a: f64,
    scale: f64,
    gamma: f64,
    n_paths: usize,
    seed: u64,
) -> ExitEstimate {
    let radius = a * scale;
    let limit = gamma * scale * scale;
    // Paths run while time stays ≤ horizon, so for X this keeps τ < γD².
    let horizon = if clock == Clock::Discrete { limit.ceil() - 1.0 } else { limit };
    let stop = StopRule::ExitBall { center: x, radius };
    let freq = count(n_paths, |p| walk(sampler, clock, x, horizon, &stop, &mut stream(seed, p), |_| true).stopped);
    ExitEstimate { scale, radius, gamma, time_limit: limit, freq }
}

/// `P^x(sup_{s ≤ t} |Y_s − x| > λ √t)` for every `λ`.
pub fn sup_displacement(sampler: &JumpSampler, x: Site, t: f64, lambdas: &[f64], n_paths: usize, seed: u64) -> Vec<(f64, Frequency)> {
    let sups: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut best = 0i64;
            walk(sampler, Clock::Rate, x, t, &StopRule::Fixed, &mut stream(seed, p), |e| {
                if let Event::Jump { to, .. } = e {
                    best = best.max((to - x).norm2());
                }
                true
            });
            (best as f64).sqrt()
        })
        .collect();
    lambdas
        .iter()
        .map(|&l| {
            let hits = sups.iter().filter(|s| **s > l * t.sqrt()).count() as u64;
            (l, Frequency::new(hits, n_paths as u64))
        })
        .collect()
}

/// `f(x, y) = 1{x ∈ marked} · h(y − x)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairFunction {
    /// Marked set `B(center, radius)`; `None` marks every site.
    pub marked: Option<(Site, f64)>,
    pub weight: JumpWeight,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "weight", rename_all = "snake_case")]
pub enum JumpWeight {
    Zero,
    /// `1{|z| ≥ min_len}`.
    LongJumps { min_len: f64 },
    /// `min(|z|, cap)`.
    CappedLength { cap: f64 },
}

impl PairFunction {
    fn marked(&self, x: &Site) -> bool {
        self.marked.map_or(true, |(c, r)| crate::lattice::within_open((*x - c).norm2(), r))
    }

    fn h(&self, z: &Site) -> f64 {
        match self.weight {
            JumpWeight::Zero => 0.0,
            JumpWeight::LongJumps { min_len } => {
                if z.norm() >= min_len {
                    1.0
                } else {
                    0.0
                }
            }
            JumpWeight::CappedLength { cap } => z.norm().min(cap),
        }
    }

    pub fn eval(&self, x: &Site, y: &Site) -> f64 {
        if self.marked(x) {
            self.h(&(*y - *x))
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum LevyStop {
    Fixed { t: f64 },
    /// `τ_{B(center, radius)} ∧ cap`.
    ExitBall { center: Site, radius: f64, cap: f64 },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LevyResult {
    /// Mean of `Σ_{s ≤ T} f(Y_{s−}, Y_s)`.
    pub lhs: f64,
    /// Mean of `∫_0^T Σ_y f(Y_s, y) C(Y_s, y) ds`.
    pub rhs: f64,
    /// Standard error of the paired difference.
    pub sigma: f64,
    pub lhs_sigma: f64,
    pub rhs_sigma: f64,
}

impl LevyResult {
    pub fn within(&self, k: f64) -> bool {
        (self.lhs - self.rhs).abs() <= k * self.sigma
    }
}

/// Both sides of the Lévy-system identity along the same paths of `Y` from `x`.
pub fn levy_system_check(
    sampler: &JumpSampler,
    x: Site,
    f: &PairFunction,
    stop: &LevyStop,
    n_paths: usize,
    seed: u64,
) -> LevyResult {
    let (rule, horizon) = match *stop {
        LevyStop::Fixed { t } => (StopRule::Fixed, t),
        LevyStop::ExitBall { center, radius, cap } => (StopRule::ExitBall { center, radius }, cap),
    };
    // Σ_z h(z) C(x, x+z) depends only on the class of x.
    let by_class = sampler.class_rates(|z| f.h(z));
    let rate = |s: &Site| -> f64 {
        if f.marked(s) {
            by_class[sampler.class_id(s)]
        } else {
            0.0
        }
    };
    let sides: Vec<(f64, f64)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let (mut l, mut r) = (0.0, 0.0);
            walk(sampler, Clock::Rate, x, horizon, &rule, &mut stream(seed, p), |e| {
                match e {
                    Event::Hold { site, duration, .. } => r += duration * rate(&site),
                    Event::Jump { from, to, .. } => l += f.eval(&from, &to),
                }
                true
            });
            (l, r)
        })
        .collect();
    let lm = Moments::from_slice(&sides.iter().map(|s| s.0).collect::<Vec<_>>());
    let rm = Moments::from_slice(&sides.iter().map(|s| s.1).collect::<Vec<_>>());
    let dm = Moments::from_slice(&sides.iter().map(|s| s.0 - s.1).collect::<Vec<_>>());
    LevyResult { lhs: lm.mean, rhs: rm.mean, sigma: dm.std_err(), lhs_sigma: lm.std_err(), rhs_sigma: rm.std_err() }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TightnessRow {
    pub n: u64,
    pub freq: Frequency,
    /// `n t₀ sup_x Σ_{|z| > η√n} C(x, x+z)` plus the deleted tail: a union bound.
    pub envelope: f64,
    /// `t₀ η^{-2} Σ_{i ≥ η√n} φ(i) (i+1)^{d+1}`, the shape of the analytic bound.
    pub series: f64,
}

/// Empirical `P(Z^(n) has a jump larger than η before t₀)` for each `n`.
pub fn jump_tightness(
    sampler: &JumpSampler,
    envelope: &crate::conductance::Envelope,
    n_grid: &[u64],
    eta: f64,
    t0: f64,
    n_paths: usize,
    seed: u64,
) -> Vec<TightnessRow> {
    let d = sampler.dim();
    n_grid
        .iter()
        .map(|&n| {
            let cut = eta * (n as f64).sqrt();
            let horizon = n as f64 * t0;
            let freq = count(n_paths, |p| {
                let mut big = false;
                walk(sampler, Clock::Rate, Site::ORIGIN, horizon, &StopRule::Fixed, &mut stream(seed ^ n, p), |e| {
                    if let Event::Jump { from, to, .. } = e {
                        big = (to - from).norm() > cut;
                        return !big;
                    }
                    true
                });
                big
            });
            let big_rate = sampler.sup_rate(|z| if z.norm() > cut { 1.0 } else { 0.0 }) + sampler.defect();
            let mut series = 0.0;
            let mut i = cut.ceil().max(1.0);
            loop {
                let term = envelope.value(i) * (i + 1.0).powi(d as i32 + 1);
                series += term;
                if term < 1e-16 * series || i > 1e6 {
                    break;
                }
                i += 1.0;
            }
            TightnessRow { n, freq, envelope: (horizon * big_rate).min(1.0), series: t0 * series / (eta * eta) }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DoobResult {
    pub freq: Frequency,
    /// `4 [n t₀] / (n η)²`.
    pub bound: f64,
}

/// Frequency of `sup_{k ≤ n t₀} |T_k − k| > n η` for `T_k` a sum of `k` unit exponentials
/// (the clock of `Y^ν` against that of `X`).
pub fn doob_transfer_check(n: u64, t0: f64, eta: f64, n_paths: usize, seed: u64) -> DoobResult {
    let steps = (n as f64 * t0).floor() as u64;
    let level = n as f64 * eta;
    let freq = count(n_paths, |p| {
        let mut rng = stream(seed, p);
        let mut t = 0.0;
        for k in 1..=steps {
            let e: f64 = rng.sample(Exp1);
            t += e;
            if (t - k as f64).abs() > level {
                return true;
            }
        }
        false
    });
    DoobResult { freq, bound: 4.0 * steps as f64 / (level * level) }
}

/// `P^y(T_target < τ_{B(center, radius)})` for the discrete chain.
pub fn hit_before_exit(
    sampler: &JumpSampler,
    y: Site,
    target: Site,
    center: Site,
    radius: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Frequency> {
    if !crate::lattice::within_open((y - center).norm2(), radius) {
        return Err(Error::Constraint("start point must lie in the ball".into()));
    }
    let stop = StopRule::HitOrExit { targets: HashSet::from([target]), center, radius };
    Ok(count(n_paths, |p| {
        let end = walk(sampler, Clock::Discrete, y, f64::INFINITY, &stop, &mut stream(seed, p), |_| true);
        end.site == target
    }))
}
