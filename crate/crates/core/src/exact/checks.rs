use super::kernel::heat_kernel;
use super::uniformization::propagate;
use crate::conductance::ConductanceModel;
use crate::error::{Error, Result};
use crate::generator::{build_operator, Masked, RateOperator};
use crate::lattice::Site;
use crate::window::LatticeWindow;
use serde::{Deserialize, Serialize};

/// Largest per-coordinate jump variance rate `max_a Σ_z z_a² C(x, x+z)` over class sources.
pub fn coordinate_variance_rate(model: &ConductanceModel, sources: &[Site], tol: f64) -> Result<f64> {
    let r = model.truncation_radius(tol, crate::conductance::DEFAULT_MAX_RADIUS)?;
    let mut best = 0.0f64;
    for x in sources {
        let j = model.jumps(x, r);
        for a in 0..model.dim() {
            best = best.max(j.iter().map(|(z, w)| (z.0[a] * z.0[a]) as f64 * w).sum());
        }
    }
    Ok(best)
}

/// One source per periodicity class (or the origin).
pub fn class_sources(model: &ConductanceModel) -> Vec<Site> {
    model.class_representatives().unwrap_or_else(|| vec![Site::ORIGIN])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowPolicy {
    /// Window half-width is `safety · sqrt(σ² t_max)` plus margins.
    pub safety: f64,
    /// Boundary leakage allowed at the largest time.
    pub leakage_budget: f64,
    /// Tail tolerance for the truncation radius.
    pub tol: f64,
    /// Enlargement attempts before giving up.
    pub max_attempts: usize,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy { safety: 6.0, leakage_budget: 1e-6, tol: 1e-9, max_attempts: 5 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NashRow {
    pub t: f64,
    /// `max_x p(t,x,x) t^{d/2}` on the window.
    pub value: f64,
    /// The same with leakage and truncation defect added to `p` (a certified upper bound).
    pub upper: f64,
    pub leakage: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NashProfile {
    pub rows: Vec<NashRow>,
    pub half_width: i64,
    pub r_star: f64,
}

impl NashProfile {
    pub fn max_upper(&self) -> f64 {
        self.rows.iter().map(|r| r.upper).fold(0.0, f64::max)
    }
}

/// Sized cube window around the sources whose leakage at `t_max` is within budget, and the
/// kernels computed on it.
fn sized_kernel(
    model: &ConductanceModel,
    times: &[f64],
    sources: &[Site],
    extra: f64,
    policy: &WindowPolicy,
) -> Result<(super::KernelTable, i64)> {
    let d = model.dim();
    let tmax = times.iter().copied().fold(0.0, f64::max);
    let sigma2 = coordinate_variance_rate(model, sources, policy.tol)?;
    let spread = sources.iter().flat_map(|s| s.0.iter().map(|c| c.abs())).max().unwrap_or(0);
    let mut half = (policy.safety * (sigma2 * tmax).sqrt() + extra).ceil() as i64 + spread + 2;
    let mut last = 0.0;
    for _ in 0..policy.max_attempts {
        let w = LatticeWindow::cube(d, Site::ORIGIN, half)?;
        let op = build_operator(model, &w, policy.tol)?;
        let k = heat_kernel(op.as_ref(), times, sources, false)?;
        let ti = times.iter().position(|t| *t == tmax).unwrap_or(0);
        last = (0..sources.len()).map(|si| k.leakage(ti, si)).fold(0.0, f64::max);
        if last <= policy.leakage_budget {
            return Ok((k, half));
        }
        half = (half as f64 * 1.5).ceil() as i64;
    }
    Err(Error::WindowTooSmall { leakage: last, budget: policy.leakage_budget })
}

/// `sup_x p(t,x,x) t^{d/2}` over class sources for every `t`.
pub fn nash_check(model: &ConductanceModel, t_grid: &[f64], policy: &WindowPolicy) -> Result<NashProfile> {
    let d = model.dim() as i32;
    let sources = class_sources(model);
    let (k, half) = sized_kernel(model, t_grid, &sources, 0.0, policy)?;
    let r_star = model.truncation_radius(policy.tol, crate::conductance::DEFAULT_MAX_RADIUS)?;
    let tail = model.tail_bound(r_star);
    let rows = t_grid
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let mut value = 0.0f64;
            let mut upper = 0.0f64;
            let mut leak = 0.0f64;
            for (si, s) in sources.iter().enumerate() {
                let p = k.p(ti, si, s);
                let l = k.leakage(ti, si);
                value = value.max(p * t.powf(d as f64 / 2.0));
                upper = upper.max((p + l + tail * t) * t.powf(d as f64 / 2.0));
                leak = leak.max(l);
            }
            NashRow { t, value, upper, leakage: leak }
        })
        .collect();
    Ok(NashProfile { rows, half_width: half, r_star })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruncatedRow {
    pub t: f64,
    /// `sup_y p^{D,λ}(t,x,y) t^{d/2} exp(λ^{-1/2}|x−y|)` with distances in `S` units.
    pub value: f64,
}

/// Profile of the truncated chain `W^λ` at scale `D` (jumps longer than `λ^{1/2}` in `S`
/// units removed); times are in `S` units, `t ∈ (0, 1]`.
pub fn truncated_kernel_check(
    model: &ConductanceModel,
    lambda: f64,
    scale: f64,
    t_grid: &[f64],
    policy: &WindowPolicy,
) -> Result<Vec<TruncatedRow>> {
    if t_grid.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(Error::Constraint("truncated_kernel_check is stated for t in (0, 1]".into()));
    }
    let d = model.dim() as i32;
    let cut = scale * lambda.sqrt();
    let w_model = model.truncated(cut);
    let sources = class_sources(&w_model);
    let unit_times: Vec<f64> = t_grid.iter().map(|t| t * scale * scale).collect();
    let (k, _) = sized_kernel(&w_model, &unit_times, &sources, cut + 2.0 * scale * lambda.sqrt(), policy)?;
    let dens = scale.powi(d);
    Ok(t_grid
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let mut best = 0.0f64;
            for (si, x) in sources.iter().enumerate() {
                for (j, y) in k.window.sites().iter().enumerate() {
                    let p = dens * k.values[si][ti][j];
                    let r = y.dist(x) / scale;
                    best = best.max(p * t.powf(d as f64 / 2.0) * (r / lambda.sqrt()).exp());
                }
            }
            TruncatedRow { t, value: best }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbationFit {
    pub times: Vec<f64>,
    /// `sup_f ||Q^V_t f − Q^W_t f||_∞ / ||f||_∞`.
    pub norms: Vec<f64>,
    /// Least-squares slope through the origin.
    pub c: f64,
    /// `max_i |norm_i − c t_i| / (c t_i)`.
    pub fit_error: f64,
}

/// Operator norm on `L^∞` of the difference between the full and truncated semigroups at
/// scale `D`, fitted as `c·t`.
pub fn semigroup_perturbation(
    model: &ConductanceModel,
    lambda: f64,
    scale: f64,
    times: &[f64],
    half_width: i64,
    tol: f64,
) -> Result<PerturbationFit> {
    let d = model.dim();
    let w = LatticeWindow::cube(d, Site::ORIGIN, half_width)?;
    let sources = class_sources(model);
    let unit_times: Vec<f64> = times.iter().map(|t| t * scale * scale).collect();
    let full = build_operator(model, &w, tol)?;
    let trunc = build_operator(&model.truncated(scale * lambda.sqrt()), &w, tol)?;
    let kv = heat_kernel(full.as_ref(), &unit_times, &sources, false)?;
    let kw = heat_kernel(trunc.as_ref(), &unit_times, &sources, false)?;
    let norms: Vec<f64> = (0..times.len())
        .map(|ti| {
            (0..sources.len())
                .map(|si| kv.row(ti, si).iter().zip(kw.row(ti, si)).map(|(a, b)| (a - b).abs()).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .collect();
    let c = times.iter().zip(&norms).map(|(t, n)| t * n).sum::<f64>() / times.iter().map(|t| t * t).sum::<f64>();
    let fit_error = times.iter().zip(&norms).map(|(t, n)| ((n - c * t) / (c * t)).abs()).fold(0.0, f64::max);
    Ok(PerturbationFit { times: times.to_vec(), norms, c, fit_error })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LowerBoundRow {
    pub t: f64,
    /// `min_{|x−y| ≤ 2√t} p(t,x,y) t^{d/2}` for the whole-lattice kernel.
    pub unkilled: f64,
    /// The same for the kernel killed outside `B(x, r_factor √t)`.
    pub killed: f64,
    /// `max_y (p − p_killed) t^{d/2}` over the same `y`.
    pub gap: f64,
}

pub fn lower_bound_check(
    model: &ConductanceModel,
    t_grid: &[f64],
    r_factor: f64,
    policy: &WindowPolicy,
) -> Result<Vec<LowerBoundRow>> {
    let d = model.dim();
    let sources = class_sources(model);
    let (k, _) = sized_kernel(model, t_grid, &sources, 0.0, policy)?;
    let mut rows = Vec::new();
    for (ti, &t) in t_grid.iter().enumerate() {
        let scale = t.powf(d as f64 / 2.0);
        let near = 2.0 * t.sqrt();
        let mut unk = f64::INFINITY;
        let mut kil = f64::INFINITY;
        let mut gap = 0.0f64;
        for (si, x) in sources.iter().enumerate() {
            let ball = LatticeWindow::ball(d, *x, r_factor * t.sqrt())?;
            let op = build_operator(model, &ball, policy.tol)?;
            let kk = heat_kernel(op.as_ref(), &[t], &[*x], true)?;
            for y in ball.sites() {
                if y.dist(x) > near {
                    continue;
                }
                let p = k.p(ti, si, y);
                let q = kk.p(0, 0, y);
                unk = unk.min(p * scale);
                kil = kil.min(q * scale);
                gap = gap.max((p - q) * scale);
            }
        }
        rows.push(LowerBoundRow { t, unkilled: unk, killed: kil, gap });
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ReversalSides {
    /// `P^x(Y_t = y, t/2 ≤ S_C ≤ t)`.
    pub lhs: f64,
    /// `P^y(Y_t = x, T_C ≤ t/2)`.
    pub rhs: f64,
}

/// Both sides of the time-reversal identity, each from its own order of propagation:
/// the left side runs `x` through the free kernel and then the `C`-avoiding kernel, the
/// right side runs `y` through the `C`-avoiding kernel and then the free kernel.
pub fn time_reversal_check(op: &dyn RateOperator, c: &[Site], x: &Site, y: &Site, t: f64) -> Result<ReversalSides> {
    let w = op.window().clone();
    let idx = |s: &Site| w.index_of(s).ok_or_else(|| Error::Constraint(format!("{:?} not in window", s.0)));
    let (xi, yi) = (idx(x)?, idx(y)?);
    let mut alive = vec![true; op.len()];
    for s in c {
        alive[idx(s)?] = false;
    }
    let avoid = Masked { inner: op, alive };
    let n = op.len();
    let delta = |i: usize| {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    };
    let p_x = propagate(op, &delta(xi), &[t / 2.0, t])?.0;
    let via_x = propagate(&avoid, &p_x[0], &[t / 2.0])?.0;
    let lhs = p_x[1][yi] - via_x[0][yi];

    let p_y = propagate(op, &delta(yi), &[t])?.0;
    let q_y = propagate(&avoid, &delta(yi), &[t / 2.0])?.0;
    let via_y = propagate(op, &q_y[0], &[t / 2.0])?.0;
    let rhs = p_y[0][xi] - via_y[0][xi];
    Ok(ReversalSides { lhs, rhs })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HolderFit {
    /// `(ρ, osc)` with `ρ` in `S` units.
    pub oscillation: Vec<(f64, f64)>,
    pub beta: f64,
    pub degenerate: bool,
}

/// Oscillation of `x ↦ p^D(t0, x, x0)` over balls `B(x0, ρ)` (in `S` units), and the
/// least-squares slope of `log osc` against `log ρ`.
pub fn holder_modulus(
    model: &ConductanceModel,
    scale: f64,
    t0: f64,
    x0: &Site,
    radii: &[f64],
    policy: &WindowPolicy,
) -> Result<HolderFit> {
    let d = model.dim();
    let rmax = radii.iter().copied().fold(0.0, f64::max);
    let sigma2 = coordinate_variance_rate(model, &[*x0], policy.tol)?;
    let half = (scale * (policy.safety * (sigma2 * t0).sqrt() + rmax)).ceil() as i64 + 2;
    let w = LatticeWindow::cube(d, *x0, half)?;
    let op = build_operator(model, &w, policy.tol)?;
    let k = heat_kernel(op.as_ref(), &[t0 * scale * scale], &[*x0], false)?;
    let dens = scale.powi(d as i32);
    let peak = k.row(0, 0).iter().copied().fold(0.0, f64::max) * dens;
    let mut osc = Vec::new();
    for &rho in radii {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (j, y) in w.sites().iter().enumerate() {
            if y.dist(x0) < rho * scale {
                let v = k.values[0][0][j] * dens;
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        osc.push((rho, hi - lo));
    }
    let degenerate = osc.iter().any(|o| !(o.1 > 1e-12 * peak.max(1e-300)));
    let beta = if degenerate {
        0.0
    } else {
        let pts: Vec<(f64, f64)> = osc.iter().map(|(r, o)| (r.ln(), o.ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    Ok(HolderFit { oscillation: osc, beta, degenerate })
}
