use super::field::{FieldKind, MatrixField, ModelSequence, SmallMatrix};
use crate::conductance::{vertex_weight, ConductanceModel};
use crate::error::{Error, Result};
use crate::exact::resolvent;
use crate::generator::build_generator;
use crate::lattice::{offsets_within, Site};
use crate::window::LatticeWindow;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Values below this are treated as exact zeros in the trend verdicts.
pub const ZERO_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u64,
    /// `sup |a^n − a|` on the compact grid.
    pub a_sup: Option<f64>,
    /// `∫ |a^n − a|` over the compact box.
    pub a_l1: Option<f64>,
    /// `∫ |b^n − a|` over the compact box.
    pub b_l1: Option<f64>,
    /// Oscillation `sup − inf` of the entries of `a^n` and `b^n` on the grid.
    pub a_variation: f64,
    pub b_variation: f64,
    /// `sup |a^n − b^n|`.
    pub ab_divergence: f64,
    /// Largest antisymmetric part of `a^n`.
    pub a_asymmetry: f64,
    /// The shift statistic `Σ_k sup_{|y| ≤ n r} sup_{|x−y| ≤ nR} |C_{x,x+k} − C_{y,y+k}|`.
    pub shift_statistic: Option<f64>,
    /// `ν^n([−1,1]^d) − ν̄ 2^d`.
    pub nu_mass_gap: f64,
    /// `∫_{[−1,1]^d} x_1² dν^n − ν̄ 2^d/3`.
    pub nu_moment_gap: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub radius: f64,
    pub extent: f64,
    pub rows: Vec<ConvergenceRow>,
    pub nu_bar: f64,
    /// `"A5"`… → `"holds" | "fails" | "inconclusive" | "not evaluated"`.
    pub verdicts: BTreeMap<String, String>,
}

impl ConvergenceReport {
    pub fn verdict(&self, key: &str) -> &str {
        self.verdicts.get(key).map_or("not evaluated", |s| s.as_str())
    }
}

/// `holds` if the series vanishes or at least halves while never increasing; `fails` if
/// it stays put; otherwise inconclusive.
fn trend(v: &[f64]) -> &'static str {
    let (Some(first), Some(last)) = (v.first(), v.last()) else {
        return "not evaluated";
    };
    let scale = v.iter().copied().fold(1.0, f64::max);
    if *last <= ZERO_TOL * scale {
        return "holds";
    }
    let monotone = v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    if monotone && *last <= 0.5 * first {
        "holds"
    } else if *last >= 0.9 * first {
        "fails"
    } else {
        "inconclusive"
    }
}

/// Mean of `ν` over a period cell, the natural candidate for the limit density of `ν^D`.
pub fn mean_vertex_weight(model: &ConductanceModel, tol: f64) -> Result<f64> {
    let reps = model
        .class_representatives()
        .ok_or_else(|| Error::Constraint("mean vertex weight needs a periodic model".into()))?;
    let mut s = 0.0;
    for r in &reps {
        s += vertex_weight(model, r, tol)?.0;
    }
    Ok(s / reps.len() as f64)
}

fn shift_statistic(model: &ConductanceModel, n: u64, radius: f64, r: f64) -> Option<f64> {
    if model.is_translation_invariant() {
        return Some(0.0);
    }
    let d = model.dim();
    let nr = n as f64 * radius;
    let ys = crate::lattice::ball_sites(d, &Site::ORIGIN, n as f64 * r + 1e-9);
    let ks = offsets_within(d, nr);
    let mut ball = offsets_within(d, nr);
    ball.push(Site::ORIGIN);
    if (ks.len() * ys.len() * ball.len()) as f64 > 2e8 {
        return None;
    }
    let mut total = 0.0;
    for k in &ks {
        let mut best = 0.0f64;
        for y in &ys {
            let cy = model.conductance(y, &(*y + *k));
            for z in &ball {
                let x = *y + *z;
                best = best.max((model.conductance(&x, &(x + *k)) - cy).abs());
            }
        }
        total += best;
    }
    Some(total)
}

/// Convergence diagnostics for `a^n`, `b^n` and `ν^n` over `n_grid` on `[−extent, extent]^d`.
pub fn convergence_diagnostics(
    seq: &ModelSequence,
    n_grid: &[u64],
    radius: f64,
    extent: f64,
    limit: Option<SmallMatrix>,
    nu_bar: Option<f64>,
    tol: f64,
) -> Result<ConvergenceReport> {
    let d = seq.dim();
    let mut rows = Vec::new();
    let mut nu_bar_used = nu_bar;
    for &n in n_grid {
        let model = seq.member(n)?;
        let a = MatrixField::compute(&model, n, radius, extent, FieldKind::A);
        let b = MatrixField::compute(&model, n, radius, extent, FieldKind::B);
        let cell = (n as f64).powi(-(d as i32));
        let lim = |p: &Site| -> Option<SmallMatrix> {
            limit.or_else(|| seq.closed_form_limit(&a.coords(p)))
        };
        let have_limit = a.points.first().map_or(false, |p| lim(p).is_some());
        let (mut a_sup, mut a_l1, mut b_l1) = (0.0f64, 0.0, 0.0);
        if have_limit {
            for ((p, am), bm) in a.points.iter().zip(&a.values).zip(&b.values) {
                let l = lim(p).expect("limit");
                a_sup = a_sup.max(am.dist(&l));
                a_l1 += cell * am.dist(&l);
                b_l1 += cell * bm.dist(&l);
            }
        }
        let variation = |f: &MatrixField| {
            let mut v = 0.0f64;
            for i in 0..d {
                for j in 0..d {
                    let (lo, hi) = f.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| (lo.min(m.m[i][j]), hi.max(m.m[i][j])));
                    v = v.max(hi - lo);
                }
            }
            v
        };
        let ab = a.values.iter().zip(&b.values).map(|(x, y)| x.dist(y)).fold(0.0, f64::max);
        let asym = a.values.iter().map(|m| m.asymmetry()).fold(0.0, f64::max);
        let nb = match nu_bar_used {
            Some(v) => v,
            None => {
                let v = mean_vertex_weight(&model, tol)?;
                nu_bar_used = Some(v);
                v
            }
        };
        // ν^n on [−1, 1]^d, from lattice sites X with |X_i| ≤ n.
        let mut lo = Site::ORIGIN;
        let mut hi = Site::ORIGIN;
        for i in 0..d {
            lo.0[i] = -(n as i64);
            hi.0[i] = n as i64;
        }
        let (mut mass, mut mom) = (0.0, 0.0);
        let mut cache = std::collections::HashMap::new();
        for x in crate::lattice::box_sites(d, &lo, &hi) {
            let key = model.class_of(&x).unwrap_or(x);
            let nu = match cache.get(&key) {
                Some(v) => *v,
                None => {
                    let v = vertex_weight(&model, &x, tol)?.0;
                    cache.insert(key, v);
                    v
                }
            };
            // Trapezoid weights make the lattice sum a consistent quadrature of the box.
            let w: f64 = (0..d).map(|i| if x.0[i].abs() == n as i64 { 0.5 } else { 1.0 }).product();
            let x1 = x.0[0] as f64 / n as f64;
            mass += cell * w * nu;
            mom += cell * w * nu * x1 * x1;
        }
        let box_vol = 2f64.powi(d as i32);
        rows.push(ConvergenceRow {
            n,
            a_sup: have_limit.then_some(a_sup),
            a_l1: have_limit.then_some(a_l1),
            b_l1: have_limit.then_some(b_l1),
            a_variation: variation(&a),
            b_variation: variation(&b),
            ab_divergence: ab,
            a_asymmetry: asym,
            shift_statistic: shift_statistic(&model, n, radius, 1.0),
            nu_mass_gap: mass - nb * box_vol,
            nu_moment_gap: mom - nb * box_vol / 3.0,
        });
    }
    let mut verdicts = BTreeMap::new();
    if rows.iter().all(|r| r.a_sup.is_some()) {
        verdicts.insert("A5".into(), trend(&rows.iter().map(|r| r.a_sup.unwrap()).collect::<Vec<_>>()).to_string());
        verdicts.insert("A6".into(), trend(&rows.iter().map(|r| r.a_l1.unwrap()).collect::<Vec<_>>()).to_string());
        verdicts.insert("A8".into(), trend(&rows.iter().map(|r| r.b_l1.unwrap()).collect::<Vec<_>>()).to_string());
    }
    if rows.iter().all(|r| r.shift_statistic.is_some()) {
        verdicts.insert("A7".into(), trend(&rows.iter().map(|r| r.shift_statistic.unwrap()).collect::<Vec<_>>()).to_string());
    }
    verdicts.insert(
        "A9".into(),
        trend(&rows.iter().map(|r| r.nu_mass_gap.abs().max(r.nu_moment_gap.abs())).collect::<Vec<_>>()).to_string(),
    );
    Ok(ConvergenceReport { radius, extent, rows, nu_bar: nu_bar_used.unwrap_or(f64::NAN), verdicts })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BridgingRow {
    pub n: u64,
    /// `E^R_n(F, R_n g)`, ordered-pair sum.
    pub form: f64,
    /// `E_{a^n}(E_n F, g) = ∫ (E_n F)' a^n g'`.
    pub field: f64,
    pub gap: f64,
}

/// Compares the discrete form with the `a^n`-weighted continuum form (d = 1), with
/// `F = U_λ f` the killed resolvent of the rescaled chain on `[−extent, extent]`.
pub fn energy_bridging(
    seq: &ModelSequence,
    n_grid: &[u64],
    radius: f64,
    extent: f64,
    lambda: f64,
    f: &dyn Fn(f64) -> f64,
    g: &dyn Fn(f64) -> f64,
) -> Result<Vec<BridgingRow>> {
    if seq.dim() != 1 {
        return Err(Error::Constraint("energy bridging is implemented for d = 1".into()));
    }
    let mut rows = Vec::new();
    for &n in n_grid {
        let nf = n as f64;
        let model = seq.member(n)?.truncated(nf * radius);
        let h = (extent * nf).round() as i64;
        let window = LatticeWindow::new_box(1, Site::new(&[-h]), Site::new(&[h]))?;
        let gen = build_generator(&model, &window, 1e-13)?;
        let rhs: Vec<f64> = window.sites().iter().map(|s| f(s.0[0] as f64 / nf) / (nf * nf)).collect();
        let u = resolvent(&gen, lambda / (nf * nf), &rhs)?;
        let fx = |x: i64| if x.abs() <= h { u[(x + h) as usize] } else { 0.0 };
        let gx = |x: i64| g(x as f64 / nf);
        let reach = (nf * radius).floor() as i64;
        let mut form = 0.0;
        for x in -h - reach..=h + reach {
            for (k, c) in model.jumps(&Site::new(&[x]), nf * radius) {
                let y = x + k.0[0];
                form += (fx(x) - fx(y)) * (gx(x) - gx(y)) * c;
            }
        }
        form *= nf;
        let mut field = 0.0;
        for m in -h - 1..=h {
            let a = super::field::a_matrix_at(&model, n, radius, &Site::new(&[m])).m[0][0];
            field += nf * (fx(m + 1) - fx(m)) * a * (gx(m + 1) - gx(m));
        }
        rows.push(BridgingRow { n, form, field, gap: (form - field).abs() });
    }
    Ok(rows)
}
