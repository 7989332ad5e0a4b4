use crate::conductance::{ConductanceModel, ModelSpec};
use crate::error::{Error, Result};
use crate::lattice::{offsets_within, Site};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    A,
    B,
}

impl FieldKind {
    pub fn label(&self) -> &'static str {
        match self {
            FieldKind::A => "a",
            FieldKind::B => "b",
        }
    }
}

/// A `d × d` matrix, `d ≤ 3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallMatrix {
    pub dim: usize,
    pub m: [[f64; 3]; 3],
}

impl SmallMatrix {
    pub fn zeros(dim: usize) -> SmallMatrix {
        SmallMatrix { dim, m: [[0.0; 3]; 3] }
    }

    pub fn scaled_identity(dim: usize, c: f64) -> SmallMatrix {
        let mut s = SmallMatrix::zeros(dim);
        for i in 0..dim {
            s.m[i][i] = c;
        }
        s
    }

    pub fn from_rows(dim: usize, v: &[f64]) -> Result<SmallMatrix> {
        if v.len() != dim * dim {
            return Err(Error::Config(format!("expected {} matrix entries, got {}", dim * dim, v.len())));
        }
        let mut s = SmallMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                s.m[i][j] = v[i * dim + j];
            }
        }
        Ok(s)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    /// Max-entry distance.
    pub fn dist(&self, o: &SmallMatrix) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                d = d.max((self.m[i][j] - o.m[i][j]).abs());
            }
        }
        d
    }

    /// Max-entry norm of `(M − Mᵀ)/2`.
    pub fn asymmetry(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                d = d.max(((self.m[i][j] - self.m[j][i]) / 2.0).abs());
            }
        }
        d
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        let a = Mat::<f64>::from_fn(self.dim, self.dim, |i, j| (self.m[i][j] + self.m[j][i]) / 2.0);
        let mut ev = a.selfadjoint_eigenvalues(Side::Lower);
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.m[i][i]).sum()
    }
}

fn floor_site(n: u64, x: &[f64]) -> Site {
    let mut s = Site::ORIGIN;
    for (i, v) in x.iter().enumerate() {
        s.0[i] = (n as f64 * v).floor() as i64;
    }
    s
}

/// `a^n(X/n)` with `C^{n,R}` (jumps `|K| ≤ nR`), `X` in units of `1/n`:
/// `(a)_ij = Σ_{(Y,K) : (Y,K) ∈ L^i_X} C(Y, Y+K) K_j sgn K_i`.
pub fn a_matrix_at(model: &ConductanceModel, n: u64, radius: f64, x: &Site) -> SmallMatrix {
    let d = model.dim();
    let mut out = SmallMatrix::zeros(d);
    for k in offsets_within(d, n as f64 * radius) {
        for i in 0..d {
            let ki = k.0[i];
            if ki == 0 {
                continue;
            }
            // y_l = x_l − k_l for l < i, y_l = x_l for l > i; y_i sweeps the |k_i| values
            // with x_i ∈ [y_i ∧ (y+k)_i, y_i ∨ (y+k)_i).
            let mut base = *x;
            for l in 0..i {
                base.0[l] -= k.0[l];
            }
            let shifts: Vec<i64> = if ki > 0 { (0..ki).map(|m| -m).collect() } else { (1..=-ki).collect() };
            let mut c_sum = 0.0;
            for m in shifts {
                let mut y = base;
                y.0[i] = x.0[i] + m;
                c_sum += model.conductance(&y, &(y + k));
            }
            for j in 0..d {
                out.m[i][j] += c_sum * k.0[j] as f64 * ki.signum() as f64;
            }
        }
    }
    out
}

/// `b^n(X/n)`: `(b)_ij = Σ_{|K| ≤ nR} C(X, X+K) K_i K_j`.
pub fn b_matrix_at(model: &ConductanceModel, n: u64, radius: f64, x: &Site) -> SmallMatrix {
    let d = model.dim();
    let mut out = SmallMatrix::zeros(d);
    for (k, c) in model.jumps(x, n as f64 * radius) {
        for i in 0..d {
            for j in 0..d {
                out.m[i][j] += c * (k.0[i] * k.0[j]) as f64;
            }
        }
    }
    out
}

/// `a^n(x)` or `b^n(x)` at a real point, evaluated at `[x]_n`.
pub fn effective_matrix(model: &ConductanceModel, n: u64, radius: f64, x: &[f64], kind: FieldKind) -> SmallMatrix {
    let s = floor_site(n, x);
    match kind {
        FieldKind::A => a_matrix_at(model, n, radius, &s),
        FieldKind::B => b_matrix_at(model, n, radius, &s),
    }
}

/// A family of conductances indexed by `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sequence", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSequence {
    /// The same conductances for every `n`.
    Fixed { model: ModelSpec },
    /// Nearest-neighbour conductances `c0 (1 + amplitude sin(2π m / (n·wavelength)))` at the
    /// edge midpoint `m`, i.e. `c(x) = c0 (1 + amplitude sin(2π x / wavelength))` on `S`.
    Modulated { dim: usize, c0: f64, amplitude: f64, wavelength: u32 },
}

impl ModelSequence {
    pub fn dim(&self) -> usize {
        match self {
            ModelSequence::Fixed { model } => model.dim(),
            ModelSequence::Modulated { dim, .. } => *dim,
        }
    }

    pub fn member(&self, n: u64) -> Result<ConductanceModel> {
        match self {
            ModelSequence::Fixed { model } => model.build(),
            ModelSequence::Modulated { dim, c0, amplitude, wavelength } => ModelSpec::ModulatedNearestNeighbor {
                dim: *dim,
                c0: *c0,
                amplitude: *amplitude,
                n: (n as u32).checked_mul(*wavelength).ok_or_else(|| Error::Constraint("modulation period overflows".into()))?,
            }
            .build(),
        }
    }

    /// Known limit `a(x)`, when the sequence has a closed form.
    pub fn closed_form_limit(&self, x: &[f64]) -> Option<SmallMatrix> {
        match self {
            ModelSequence::Fixed { .. } => None,
            ModelSequence::Modulated { dim, c0, amplitude, wavelength } => {
                let c = c0 * (1.0 + amplitude * (2.0 * std::f64::consts::PI * x[0] / *wavelength as f64).sin());
                Some(SmallMatrix::scaled_identity(*dim, 2.0 * c))
            }
        }
    }
}

/// `a^n` or `b^n` on the grid points of `n^{-1}Z^d` inside `[−extent, extent]^d`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixField {
    pub n: u64,
    pub radius: f64,
    pub kind: FieldKind,
    /// Grid points in units of `1/n`.
    pub points: Vec<Site>,
    pub values: Vec<SmallMatrix>,
}

impl MatrixField {
    pub fn compute(model: &ConductanceModel, n: u64, radius: f64, extent: f64, kind: FieldKind) -> MatrixField {
        use rayon::prelude::*;
        let d = model.dim();
        let h = (extent * n as f64).floor() as i64;
        let mut lo = Site::ORIGIN;
        let mut hi = Site::ORIGIN;
        for a in 0..d {
            lo.0[a] = -h;
            hi.0[a] = h;
        }
        let points = crate::lattice::box_sites(d, &lo, &hi);
        let values = points
            .par_iter()
            .map(|x| match kind {
                FieldKind::A => a_matrix_at(model, n, radius, x),
                FieldKind::B => b_matrix_at(model, n, radius, x),
            })
            .collect();
        MatrixField { n, radius, kind, points, values }
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(1, |m| m.dim)
    }

    pub fn coords(&self, p: &Site) -> Vec<f64> {
        (0..self.dim()).map(|a| p.0[a] as f64 / self.n as f64).collect()
    }

    /// CSV with columns `x1..xd, i, j, value, n, R, kind` (indices 1-based).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let d = self.dim();
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        header.extend(["i", "j", "value", "n", "R", "kind"].iter().map(|s| s.to_string()));
        wtr.write_record(&header)?;
        for (p, m) in self.points.iter().zip(&self.values) {
            for i in 0..d {
                for j in 0..d {
                    let mut rec: Vec<String> = self.coords(p).iter().map(|c| format!("{c}")).collect();
                    rec.push((i + 1).to_string());
                    rec.push((j + 1).to_string());
                    rec.push(format!("{}", m.m[i][j]));
                    rec.push(self.n.to_string());
                    rec.push(format!("{}", self.radius));
                    rec.push(self.kind.label().to_string());
                    wtr.write_record(&rec)?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}
