//! Weighted Poincaré ratios with the exponential weight `g_D`.

use crate::error::{Error, Result};
use crate::lattice::{box_sites, check_dim, Site};
use faer::{Mat, Side};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Test functions, written in the rescaled coordinate `x = l / D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoincareFamily {
    Constant,
    Linear,
    Step,
    Alternating,
    Random,
    Sine,
    Abs,
    /// `sign(x_1) e^{0.45 |x_1|}`: grows as fast as the weight allows.
    Growing,
}

impl PoincareFamily {
    pub const ADVERSARIAL: [PoincareFamily; 7] = [
        PoincareFamily::Linear,
        PoincareFamily::Step,
        PoincareFamily::Alternating,
        PoincareFamily::Random,
        PoincareFamily::Sine,
        PoincareFamily::Abs,
        PoincareFamily::Growing,
    ];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoincareRow {
    pub family: PoincareFamily,
    /// `⟨(f − ⟨f⟩)²⟩_g`.
    pub variance: f64,
    /// `D^{2−d} Σ_l g_D(l) Σ_i (f(l+e^i) − f(l))²`.
    pub energy: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoincareReport {
    pub dim: usize,
    pub scale: f64,
    /// Grid half-width in `S` units.
    pub extent: f64,
    pub rows: Vec<PoincareRow>,
    /// Best constant over all `f` on the grid (d = 1 only).
    pub optimum: Option<f64>,
}

impl PoincareReport {
    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).chain(self.optimum).fold(0.0, f64::max)
    }
}

/// `g_D(l)` on `|l_i| ≤ L`, normalised so that `D^{−d} Σ g_D = 1` over all of `Z^d`
/// (the normaliser uses the closed-form geometric sum, so truncation only drops mass).
pub fn weight(dim: usize, scale: f64, l: &Site) -> f64 {
    let q = (-1.0 / scale).exp();
    let s1 = (1.0 + q) / (1.0 - q);
    let mut w = scale.powi(dim as i32) / s1.powi(dim as i32);
    for i in 0..dim {
        w *= (-(l.0[i].abs() as f64) / scale).exp();
    }
    w
}

fn eval(family: PoincareFamily, x: &[f64], l: &Site, rng_vals: Option<f64>) -> f64 {
    match family {
        PoincareFamily::Constant => 1.0,
        PoincareFamily::Linear => x[0],
        PoincareFamily::Step => {
            if x[0] > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        PoincareFamily::Alternating => {
            if l.0.iter().sum::<i64>().rem_euclid(2) == 0 {
                1.0
            } else {
                -1.0
            }
        }
        PoincareFamily::Random => rng_vals.unwrap_or(0.0),
        PoincareFamily::Sine => x.iter().map(|v| v.sin()).sum(),
        PoincareFamily::Abs => x.iter().map(|v| v.abs()).sum(),
        PoincareFamily::Growing => x[0].signum() * (0.45 * x[0].abs()).exp(),
    }
}

/// Variance against `g_D` and the weighted gradient energy of `f` on `|l_i| ≤ extent·D`.
pub fn poincare_sides(dim: usize, scale: f64, extent: f64, f: &dyn Fn(&Site) -> f64) -> Result<(f64, f64)> {
    check_dim(dim)?;
    if !(scale >= 1.0) {
        return Err(Error::Constraint(format!("scale must be at least 1, got {scale}")));
    }
    let half = (extent * scale).ceil() as i64;
    let mut lo = Site::ORIGIN;
    let mut hi = Site::ORIGIN;
    for i in 0..dim {
        lo.0[i] = -half;
        hi.0[i] = half;
    }
    let sites = box_sites(dim, &lo, &hi);
    let dens = scale.powi(-(dim as i32));
    let vals: Vec<f64> = sites.iter().map(f).collect();
    let ws: Vec<f64> = sites.iter().map(|l| dens * weight(dim, scale, l)).collect();
    let total: f64 = ws.iter().sum();
    let mean = ws.iter().zip(&vals).map(|(w, v)| w * v).sum::<f64>() / total;
    let variance = ws.iter().zip(&vals).map(|(w, v)| w * (v - mean) * (v - mean)).sum::<f64>() / total;
    let mut energy = 0.0;
    let width = (2 * half + 1) as usize;
    for (k, l) in sites.iter().enumerate() {
        let g = weight(dim, scale, l);
        for i in 0..dim {
            if l.0[i] < half {
                let stride = width.pow((dim - 1 - i) as u32);
                let diff = vals[k + stride] - vals[k];
                energy += g * diff * diff;
            }
        }
    }
    Ok((variance, scale.powi(2 - dim as i32) * energy))
}

/// Ratios for each family at scale `D`; the random family is drawn from `seed`.
pub fn weighted_poincare_check(
    dim: usize,
    scale: f64,
    families: &[PoincareFamily],
    extent: f64,
    seed: u64,
) -> Result<PoincareReport> {
    let mut rows = Vec::new();
    for &fam in families {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = (extent * scale).ceil() as i64;
        let random: std::collections::HashMap<Site, f64> = if fam == PoincareFamily::Random {
            let mut lo = Site::ORIGIN;
            let mut hi = Site::ORIGIN;
            for i in 0..dim {
                lo.0[i] = -half;
                hi.0[i] = half;
            }
            box_sites(dim, &lo, &hi).into_iter().map(|s| (s, rng.gen_range(-1.0..1.0))).collect()
        } else {
            Default::default()
        };
        let f = |l: &Site| {
            let x: Vec<f64> = (0..dim).map(|i| l.0[i] as f64 / scale).collect();
            eval(fam, &x, l, random.get(l).copied())
        };
        let (variance, energy) = poincare_sides(dim, scale, extent, &f)?;
        let ratio = if variance <= 1e-300 && energy <= 1e-300 { 0.0 } else { variance / energy };
        rows.push(PoincareRow { family: fam, variance, energy, ratio });
    }
    let optimum = if dim == 1 { Some(optimal_ratio_1d(scale, extent)?) } else { None };
    Ok(PoincareReport { dim, scale, extent, rows, optimum })
}

/// Largest `Var_g(f) / energy(f)` over all `f` on the d = 1 grid: a generalised eigenvalue
/// problem in the increments `u_m = f(m+1) − f(m)`.
pub fn optimal_ratio_1d(scale: f64, extent: f64) -> Result<f64> {
    let half = (extent * scale).ceil() as i64;
    let n = (2 * half + 1) as usize;
    let m = n - 1;
    let w: Vec<f64> = (0..n).map(|k| weight(1, scale, &Site::new(&[k as i64 - half])) / scale).collect();
    let total: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|v| v / total).collect();
    // f_k = Σ_{j<k} u_j; Var = uᵀ Aᵀ (diag p − p pᵀ) A u with A_kj = [j < k].
    // (Aᵀ p)_j = Σ_{k>j} p_k =: s_j, and (Aᵀ diag(p) A)_{ij} = Σ_{k > max(i,j)} p_k.
    let mut s = vec![0.0; m];
    let mut acc = 0.0;
    for j in (0..m).rev() {
        acc += p[j + 1];
        s[j] = acc;
    }
    let energy_w: Vec<f64> = (0..m).map(|j| scale * weight(1, scale, &Site::new(&[j as i64 - half]))).collect();
    let a = Mat::<f64>::from_fn(m, m, |i, j| {
        let v = s[i.max(j)] - s[i] * s[j];
        v / (energy_w[i] * energy_w[j]).sqrt()
    });
    let ev = a.selfadjoint_eigenvalues(Side::Lower);
    Ok(ev.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_zero_ratio() {
        let r = weighted_poincare_check(1, 2.0, &[PoincareFamily::Constant], 40.0, 1).unwrap();
        assert_eq!(r.rows[0].ratio, 0.0);
    }

    #[test]
    fn optimum_dominates_families() {
        let r = weighted_poincare_check(1, 1.0, &PoincareFamily::ADVERSARIAL, 40.0, 3).unwrap();
        let opt = r.optimum.unwrap();
        for row in &r.rows {
            assert!(row.ratio <= opt * (1.0 + 1e-9), "{:?} {} > {}", row.family, row.ratio, opt);
        }
    }

    #[test]
    fn weight_is_normalised() {
        let s: f64 = (-400..=400).map(|l| weight(1, 3.0, &Site::new(&[l])) / 3.0).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
