//! Harmonic functions on finite sets, Harnack constants, and the failure example.

use crate::conductance::{ConductanceModel, ModelSpec};
use crate::error::{Error, Result};
use crate::generator::{build_generator, GeneratorMatrix};
use crate::lattice::Site;
use crate::sampler::{hit_before_exit, Frequency, JumpSampler};
use crate::window::{ExteriorPolicy, LatticeWindow};
use faer::prelude::*;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// Exterior data: explicit values on tracked sites, `default` on the other tracked
/// sites, and one aggregated value `far` for everything beyond the tracked shell.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BoundaryData {
    pub values: HashMap<Site, f64>,
    pub default: f64,
    pub far: f64,
}

impl BoundaryData {
    pub fn constant(v: f64) -> BoundaryData {
        BoundaryData { values: HashMap::new(), default: v, far: v }
    }

    pub fn point(w: Site) -> BoundaryData {
        BoundaryData { values: HashMap::from([(w, 1.0)]), default: 0.0, far: 0.0 }
    }

    pub fn indicator(sites: impl IntoIterator<Item = Site>) -> BoundaryData {
        BoundaryData { values: sites.into_iter().map(|s| (s, 1.0)).collect(), default: 0.0, far: 0.0 }
    }

    pub fn tracked(&self, w: &Site) -> f64 {
        self.values.get(w).copied().unwrap_or(self.default)
    }

    fn bounds(&self) -> (f64, f64) {
        let it = self.values.values().copied().chain([self.default, self.far]);
        it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

#[derive(Clone, Debug)]
pub struct HarmonicSolution {
    pub window: Arc<LatticeWindow>,
    pub h: Vec<f64>,
    /// `‖(ν − C_AA) h − rhs‖_∞ / ‖rhs‖_∞`.
    pub residual: f64,
    /// Largest `|Σ_z P(x,z) h(z) − h(x)|`, re-evaluated from the model's jump law.
    pub harmonicity: f64,
    /// Bound on the effect of jumps beyond `R*`: `tail / ν_min · max|data|`.
    pub tail: f64,
}

impl HarmonicSolution {
    pub fn at(&self, x: &Site) -> Option<f64> {
        self.window.index_of(x).map(|i| self.h[i])
    }
}

fn tracked_generator(model: &ConductanceModel, window: &LatticeWindow, shell: Option<f64>, tol: f64) -> Result<GeneratorMatrix> {
    let w = window.clone().with_policy(ExteriorPolicy::TrackTargets { radius: shell });
    build_generator(model, &w, tol)
}

/// `h` on `A` with `h = data` off `A` and `Σ_z h(z) P(x,z) = h(x)` on `A`.
pub fn harmonic_solve(model: &ConductanceModel, window: &LatticeWindow, data: &BoundaryData, tol: f64) -> Result<HarmonicSolution> {
    let gen = tracked_generator(model, window, None, tol)?;
    let targets = gen.targets.as_ref().expect("tracked");
    let n = gen.len();
    let mut rhs = vec![0.0; n];
    for (i, r) in rhs.iter_mut().enumerate() {
        for (w, c) in targets.rates.row(i) {
            *r += c * data.tracked(&targets.sites[w]);
        }
        *r += targets.far[i] * data.far;
    }
    let solver = crate::linalg::SpdSolver::new(&gen.nu, &gen.offdiag)?;
    let h = solver.solve(&rhs)?;
    let lhs = gen.apply_neg(&h);
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let residual = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    let mut harmonicity = 0.0f64;
    for (i, x) in gen.window.sites().iter().enumerate() {
        let mut s = 0.0;
        for (z, c) in model.jumps(x, gen.r_star) {
            let y = *x + z;
            let v = match gen.window.index_of(&y) {
                Some(j) => h[j],
                None if targets.index.contains_key(&y) => data.tracked(&y),
                None => data.far,
            };
            s += c * v;
        }
        harmonicity = harmonicity.max((s / gen.nu[i] - h[i]).abs());
    }
    let (lo, hi) = data.bounds();
    let nu_min = gen.nu.iter().copied().fold(f64::INFINITY, f64::min);
    let tail = gen.defect.first().copied().unwrap_or(0.0) / nu_min * lo.abs().max(hi.abs());
    Ok(HarmonicSolution { window: gen.window.clone(), h, residual, harmonicity, tail })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DataFamily {
    /// Point masses at every exterior site within `shell` of the ball.
    PointMasses { shell: f64 },
    /// The single indicator of that exterior shell.
    ShellIndicator { shell: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarnackRow {
    pub radius: f64,
    /// `sup_w sup_{x,y ∈ core} h_w(x)/h_w(y)`.
    pub constant: f64,
    /// Data member attaining the constant.
    pub worst: Option<Site>,
    pub sites: usize,
    pub core_sites: usize,
    pub members: usize,
    /// Members whose `h` vanished somewhere on the core (ratio undefined).
    pub skipped: usize,
}

/// Harnack constants on `B(center, R)` over the core `B(center, θR)`, by exact dense solves.
pub fn harnack_constant(
    model: &ConductanceModel,
    center: Site,
    radii: &[f64],
    family: DataFamily,
    theta: f64,
    tol: f64,
) -> Result<Vec<HarnackRow>> {
    let mut rows = Vec::new();
    for &r in radii {
        let window = LatticeWindow::ball(model.dim(), center, r)?;
        let shell = match family {
            DataFamily::PointMasses { shell } | DataFamily::ShellIndicator { shell } => shell,
        };
        let gen = tracked_generator(model, &window, Some(shell), tol)?;
        let n = gen.len();
        if n > crate::linalg::DENSE_CAP {
            return Err(Error::SizeExceeded { size: n, cap: crate::linalg::DENSE_CAP, suggestion: crate::linalg::DENSE_CAP });
        }
        let targets = gen.targets.as_ref().expect("tracked");
        let m = targets.sites.len();
        let a = Mat::<f64>::from_fn(n, n, |i, j| if i == j { gen.nu[i] } else { 0.0 });
        let mut a = a;
        for i in 0..n {
            for (j, c) in gen.offdiag.row(i) {
                a.write(i, j, a.read(i, j) - c);
            }
        }
        let chol = a.cholesky(Side::Lower).map_err(|_| Error::Singular("harmonic system is not positive definite".into()))?;
        let cols = match family {
            DataFamily::PointMasses { .. } => m,
            DataFamily::ShellIndicator { .. } => 1,
        };
        let mut rhs = Mat::<f64>::zeros(n, cols);
        for i in 0..n {
            for (w, c) in targets.rates.row(i) {
                let col = if cols == 1 { 0 } else { w };
                rhs.write(i, col, rhs.read(i, col) + c);
            }
        }
        let h = chol.solve(&rhs);
        let core: Vec<usize> = (0..n).filter(|&i| gen.window.site(i).dist(&center) < theta * r).collect();
        let mut constant = 1.0f64;
        let mut worst = None;
        let mut skipped = 0;
        for c in 0..cols {
            let (lo, hi) = core.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &i| (lo.min(h.read(i, c)), hi.max(h.read(i, c))));
            if !(lo > 0.0) {
                skipped += 1;
                continue;
            }
            if hi / lo > constant {
                constant = hi / lo;
                worst = if cols == 1 { None } else { Some(targets.sites[c]) };
            }
        }
        rows.push(HarnackRow { radius: r, constant, worst, sites: n, core_sites: core.len(), members: cols, skipped });
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CounterexampleRow {
    pub index: usize,
    pub b: i64,
    pub radius: f64,
    pub y: Site,
    /// `P^{y}(T_0 < τ_n)`.
    pub hit: Frequency,
    /// `h_n(0)/h_n(y) = 1 / P^{y}(T_0 < τ_n)`.
    pub ratio: f64,
    /// `(1/hi, 1/lo)` from the 3σ Wilson interval of `hit`.
    pub ratio_ci: (f64, f64),
    pub inconclusive: bool,
}

/// `h_n(0)/h_n(y_n)` for the walk with atoms at `±b_n e¹`, via the reduction
/// `h_n(y) = P^y(T_0 < τ_n) h_n(0)`, `τ_n` the exit time of `B(0, (1−δ) b_n)`.
pub fn counterexample_ratio(
    b: &[i64],
    a: &[f64],
    index: usize,
    delta: f64,
    n_paths: usize,
    seed: u64,
) -> Result<CounterexampleRow> {
    if index >= b.len() {
        return Err(Error::Constraint(format!("index {index} out of range for {} scales", b.len())));
    }
    let model = ModelSpec::HarnackCounterexample { dim: 3, b: b.to_vec(), a: a.to_vec() }.build()?;
    let sampler = JumpSampler::new(&model, 1e-12)?;
    let radius = (1.0 - delta) * b[index] as f64;
    let y = Site::new(&[(radius / 4.0).round() as i64, 0, 0]);
    if y == Site::ORIGIN {
        let hit = Frequency::new(n_paths as u64, n_paths as u64);
        return Ok(CounterexampleRow { index, b: b[index], radius, y, hit, ratio: 1.0, ratio_ci: (1.0, 1.0), inconclusive: false });
    }
    let hit = hit_before_exit(&sampler, y, Site::ORIGIN, Site::ORIGIN, radius, n_paths, seed)?;
    let inconclusive = hit.hits == 0;
    let ratio = if inconclusive { f64::INFINITY } else { 1.0 / hit.p };
    let ratio_ci = (1.0 / hit.ci.1, if hit.ci.0 > 0.0 { 1.0 / hit.ci.0 } else { f64::INFINITY });
    Ok(CounterexampleRow { index, b: b[index], radius, y, hit, ratio, ratio_ci, inconclusive })
}
