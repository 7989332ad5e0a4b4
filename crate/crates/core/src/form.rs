//! Dirichlet forms at scale `D` on `S = D^{-1} Z^d`.

use crate::conductance::ConductanceModel;
use crate::error::Result;
use crate::generator::{build_generator, GeneratorMatrix};
use crate::window::LatticeWindow;
use serde::{Deserialize, Serialize};

/// Form parameters. Functions on `S` are stored by their values at `l/D`, indexed by the
/// unit-lattice window site `l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledForm {
    /// Scale `D ≥ 1`; `Z^(n)` corresponds to `D = √n`.
    pub scale: f64,
    /// Keep only jumps with `|x − y| ≤ truncation` in `S` units (`C^{n,R}`).
    pub truncation: Option<f64>,
    /// Multiply the ordered-pair sum by ½.
    pub half: bool,
}

impl RescaledForm {
    pub fn new(scale: f64, half: bool) -> RescaledForm {
        RescaledForm { scale, truncation: None, half }
    }

    /// `μ^D_x = D^{−d}`.
    pub fn site_measure(&self, dim: usize) -> f64 {
        self.scale.powi(-(dim as i32))
    }

    /// The model with jumps longer than `truncation · D` (unit-lattice units) deleted.
    pub fn effective_model(&self, model: &ConductanceModel) -> ConductanceModel {
        match self.truncation {
            Some(r) => model.truncated(r * self.scale),
            None => model.clone(),
        }
    }
}

/// `Σ_{(x,y) ordered} (f(x)−f(y))(g(x)−g(y)) D^{2−d} C_{Dx,Dy}` (×½ if `half`), with `f`, `g`
/// extended by zero outside the window so boundary pairs contribute through the kill rates.
pub fn dirichlet_energy(
    form: &RescaledForm,
    model: &ConductanceModel,
    window: &LatticeWindow,
    f: &[f64],
    g: &[f64],
    tol: f64,
) -> Result<f64> {
    let gen = build_generator(&form.effective_model(model), window, tol)?;
    Ok(energy_from_generator(&gen, form, f, g))
}

pub fn energy_from_generator(gen: &GeneratorMatrix, form: &RescaledForm, f: &[f64], g: &[f64]) -> f64 {
    let d = gen.window.dim() as i32;
    let mut s = 0.0;
    for i in 0..gen.len() {
        let mut row = 0.0;
        for (j, c) in gen.offdiag.row(i) {
            row += c * (f[i] - f[j]) * (g[i] - g[j]);
        }
        // both orderings of each boundary pair
        s += row + 2.0 * gen.kill[i] * f[i] * g[i];
    }
    let factor = form.scale.powi(2 - d) * if form.half { 0.5 } else { 1.0 };
    s * factor
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductance::ModelSpec;
    use crate::lattice::Site;

    #[test]
    fn indicator_energy() {
        let m = ModelSpec::NearestNeighbor { dim: 1, c: 1.0 }.build().unwrap();
        let w = LatticeWindow::cube(1, Site::ORIGIN, 3).unwrap();
        let f: Vec<f64> = w.sites().iter().map(|s| if *s == Site::ORIGIN { 1.0 } else { 0.0 }).collect();
        let e = dirichlet_energy(&RescaledForm::new(1.0, false), &m, &w, &f, &f, 1e-12).unwrap();
        assert_eq!(e, 4.0);
        let e = dirichlet_energy(&RescaledForm::new(1.0, true), &m, &w, &f, &f, 1e-12).unwrap();
        assert_eq!(e, 2.0);
    }
}
