use super::diagnostics::mean_vertex_weight;
use super::field::{ModelSequence, SmallMatrix};
use crate::error::Result;
use crate::lattice::Site;
use crate::sampler::{simulate, PathEnsemble, ProcessKind, SimulateOptions};
use crate::stats::{ks_lattice, ks_pvalue, normal_cdf, variance_std_err, Moments};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AronsonFit {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// Bins used (at least `min_count` samples each).
    pub bins: usize,
    pub inside: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CltRow {
    pub n: u64,
    /// `"Z"` (continuous time) or `"W"` (discrete time).
    pub process: String,
    pub t: f64,
    pub paths: usize,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Target variance per coordinate: `a_ii t` for `Z`, `a_ii t / ν̄` for `W`.
    pub expected: Vec<f64>,
    /// Standard error of each sample variance.
    pub variance_se: Vec<f64>,
    /// Lattice-corrected Kolmogorov–Smirnov distance per coordinate.
    pub ks: Vec<f64>,
    pub ks_pvalue: Vec<f64>,
    pub span: Vec<f64>,
    pub aronson: Option<AronsonFit>,
    pub digest: String,
}

impl CltRow {
    pub fn variance_within(&self, k: f64) -> bool {
        (0..self.expected.len()).all(|i| (self.covariance[i][i] - self.expected[i]).abs() <= k * self.variance_se[i])
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn aronson_fit(pos: &[Vec<f64>], a: &SmallMatrix, t: f64, min_count: usize) -> Option<AronsonFit> {
    let d = a.dim;
    if t <= 0.0 {
        return None;
    }
    let ev = a.sym_eigenvalues();
    let (lmin, lmax) = (ev[0], ev[d - 1]);
    let c2 = 1.25 / (2.0 * lmin);
    let c4 = 0.8 / (2.0 * lmax);
    let width = 0.25 * (lmin * t).sqrt();
    let radii: Vec<f64> = pos.iter().map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let nb = 64;
    let mut counts = vec![0usize; nb];
    for r in &radii {
        let b = (r / width) as usize;
        if b < nb {
            counts[b] += 1;
        }
    }
    let ball = |r: f64| crate::lattice::unit_ball_volume(d) * r.powi(d as i32);
    let (mut c1, mut c3) = (f64::INFINITY, 0.0f64);
    let mut used = 0;
    for (b, &c) in counts.iter().enumerate() {
        if c < min_count {
            continue;
        }
        let (r0, r1) = (b as f64 * width, (b + 1) as f64 * width);
        let dens = c as f64 / pos.len() as f64 / (ball(r1) - ball(r0));
        let rm = 0.5 * (r0 + r1);
        let v = dens * t.powf(d as f64 / 2.0);
        c1 = c1.min(v * (c2 * rm * rm / t).exp());
        c3 = c3.max(v * (c4 * rm * rm / t).exp());
        used += 1;
    }
    if used == 0 {
        return None;
    }
    Some(AronsonFit { c1, c2, c3, c4, bins: used, inside: c1 > 0.0 && c3.is_finite() && c3 / c1 <= 50.0 })
}

fn summarize(ens: &PathEnsemble, n: u64, process: &str, t: f64, expected: Vec<f64>, a: &SmallMatrix) -> CltRow {
    let d = ens.dim();
    let pos = ens.positions();
    let sq = (n as f64).sqrt();
    let mut mean = vec![0.0; d];
    let mut cov = vec![vec![0.0; d]; d];
    let mut variance_se = vec![0.0; d];
    let mut ks = vec![0.0; d];
    let mut ks_p = vec![1.0; d];
    let mut span = vec![0.0; d];
    for i in 0..d {
        let xs: Vec<f64> = pos.iter().map(|p| p[i]).collect();
        mean[i] = Moments::from_slice(&xs).mean;
        variance_se[i] = variance_std_err(&xs);
        let g = ens.ends.iter().fold(0i64, |g, e| gcd(g, e.site.0[i] - ens.start.0[i]));
        span[i] = g.max(1) as f64 / sq;
        if expected[i] > 0.0 {
            let sd = expected[i].sqrt();
            let x0 = ens.start.0[i] as f64 / sq;
            ks[i] = ks_lattice(&xs, span[i], |x| normal_cdf(x, x0, sd));
            ks_p[i] = ks_pvalue(ks[i], xs.len());
        }
    }
    for i in 0..d {
        for j in 0..d {
            let s: f64 = pos.iter().map(|p| (p[i] - mean[i]) * (p[j] - mean[j])).sum();
            cov[i][j] = s / (pos.len().max(2) - 1) as f64;
        }
    }
    let centred: Vec<Vec<f64>> = pos.iter().map(|p| p.iter().zip(&mean).map(|(v, m)| v - m).collect()).collect();
    let scale = if process == "W" { expected[0] / (a.m[0][0] * t) } else { 1.0 };
    let mut a_eff = *a;
    for r in a_eff.m.iter_mut() {
        for v in r.iter_mut() {
            *v *= scale;
        }
    }
    CltRow {
        n,
        process: process.into(),
        t,
        paths: pos.len(),
        mean,
        covariance: cov,
        expected,
        variance_se,
        ks,
        ks_pvalue: ks_p,
        span,
        aronson: aronson_fit(&centred, &a_eff, t, 200),
        digest: ens.digest(),
    }
}

/// Empirical laws of `Z^(n)_t` and `W^(n)_t` from the origin against the Gaussian with
/// covariance `a t` (resp. `a t / ν̄`).
pub fn clt_compare(
    seq: &ModelSequence,
    n_grid: &[u64],
    t: f64,
    limit: &SmallMatrix,
    nu_bar: Option<f64>,
    n_paths: usize,
    seed: u64,
    tol: f64,
) -> Result<Vec<CltRow>> {
    let d = seq.dim();
    let mut rows = Vec::new();
    for &n in n_grid {
        let model = seq.member(n)?;
        let opts = SimulateOptions { tol, ..Default::default() };
        let nb = match nu_bar {
            Some(v) => v,
            None => mean_vertex_weight(&model, tol)?,
        };
        let z = simulate(ProcessKind::Rescaled { n }, &model, Site::ORIGIN, t, n_paths, seed ^ (n << 20), &opts)?;
        let expected: Vec<f64> = (0..d).map(|i| limit.m[i][i] * t).collect();
        rows.push(summarize(&z, n, "Z", t, expected.clone(), limit));
        let w = simulate(ProcessKind::DiscreteRescaled { n }, &model, Site::ORIGIN, t, n_paths, seed ^ (n << 20) ^ 1, &opts)?;
        rows.push(summarize(&w, n, "W", t, expected.iter().map(|e| e / nb).collect(), limit));
    }
    Ok(rows)
}
