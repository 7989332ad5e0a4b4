use crate::error::{Error, Result};
use crate::generator::GeneratorMatrix;
use crate::lattice::Site;
use crate::linalg::{dense_lu_solve, spd_inverse, SpdSolver};
use faer::Mat;

/// `G_B = (−L_killed)^{−1}`: expected occupation time of `y` before exit, from `x`.
#[derive(Clone, Debug)]
pub struct GreenFunction {
    pub g: Vec<Vec<f64>>,
}

impl GreenFunction {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.g[i][j]
    }
}

pub fn green_function(gen: &GeneratorMatrix) -> Result<GreenFunction> {
    if gen.kill.iter().all(|&k| k == 0.0) {
        return Err(Error::Singular("window has no exit; the generator is not invertible".into()));
    }
    Ok(GreenFunction { g: spd_inverse(&gen.nu, &gen.offdiag)? })
}

/// One row of the Green function, `G_B(x, ·)`, from a single solve.
pub fn green_row(gen: &GeneratorMatrix, x: usize) -> Result<Vec<f64>> {
    let mut e = vec![0.0; gen.len()];
    e[x] = 1.0;
    SpdSolver::new(&gen.nu, &gen.offdiag)?.solve(&e)
}

/// Exit distribution from a start site.
#[derive(Clone, Debug)]
pub struct HittingDistribution {
    /// `(w, P^x(Y_τ = w))` over tracked exterior sites.
    pub targets: Vec<(Site, f64)>,
    /// Mass exiting to untracked sites.
    pub remainder: f64,
    /// Max disagreement between the harmonic-solve route and the Green-function route.
    pub discrepancy: f64,
}

impl HittingDistribution {
    pub fn total(&self) -> f64 {
        self.targets.iter().map(|t| t.1).sum::<f64>() + self.remainder
    }

    pub fn prob(&self, w: &Site) -> f64 {
        self.targets.iter().find(|t| t.0 == *w).map_or(0.0, |t| t.1)
    }
}

/// Largest discrepancy tolerated between the two routes before reporting a failure.
pub const HITTING_CONSISTENCY: f64 = 1e-8;

/// `P^x(Y_τ = w)` for every tracked exterior `w`, computed (i) by solving the discrete
/// chain's harmonic problems `(I − P) h_w = P(·, w)` and (ii) as `Σ_z G_B(x,z) C(z,w)`.
pub fn hitting_distribution(gen: &GeneratorMatrix, x: &Site) -> Result<HittingDistribution> {
    let targets = gen
        .targets
        .as_ref()
        .ok_or_else(|| Error::Constraint("hitting_distribution needs a track-targets window".into()))?;
    let xi = gen
        .window
        .index_of(x)
        .ok_or_else(|| Error::Constraint(format!("start {:?} not in window", x.0)))?;
    let n = gen.len();
    let m = targets.sites.len();

    // (i) discrete chain: (I − P_AA) h = P_{A,w}
    let mut a = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        a.write(i, i, 1.0);
        for (j, c) in gen.offdiag.row(i) {
            a.write(i, j, a.read(i, j) - c / gen.nu[i]);
        }
    }
    let mut cols = vec![vec![0.0; n]; m + 1];
    for i in 0..n {
        for (w, c) in targets.rates.row(i) {
            cols[w][i] = c / gen.nu[i];
        }
        cols[m][i] = targets.far[i] / gen.nu[i];
    }
    let h = dense_lu_solve(&a, &cols)?;
    let via_solve: Vec<f64> = h.iter().map(|col| col[xi]).collect();

    // (ii) Green function row times exit rates
    let g = green_row(gen, xi)?;
    let mut via_green = vec![0.0; m + 1];
    for (z, gz) in g.iter().enumerate() {
        for (w, c) in targets.rates.row(z) {
            via_green[w] += gz * c;
        }
        via_green[m] += gz * targets.far[z];
    }
    let discrepancy = via_solve.iter().zip(&via_green).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if discrepancy > HITTING_CONSISTENCY {
        return Err(Error::Consistency { what: "hitting distribution (solve vs Green)".into(), discrepancy });
    }
    Ok(HittingDistribution {
        targets: targets.sites.iter().copied().zip(via_solve[..m].iter().copied()).collect(),
        remainder: via_solve[m],
        discrepancy,
    })
}

/// `E^x τ` for every window site: solves `(−L) u = 1`.
pub fn exit_time_moments(gen: &GeneratorMatrix) -> Result<Vec<f64>> {
    if gen.kill.iter().all(|&k| k == 0.0) {
        return Err(Error::Singular("window has no exit".into()));
    }
    SpdSolver::new(&gen.nu, &gen.offdiag)?.solve(&vec![1.0; gen.len()])
}

/// `U_λ f`, solving `(λ − L) u = f` on the window.
pub fn resolvent(gen: &GeneratorMatrix, lambda: f64, f: &[f64]) -> Result<Vec<f64>> {
    resolvent_many(gen, lambda, std::slice::from_ref(&f.to_vec())).map(|mut v| v.remove(0))
}

pub fn resolvent_many(gen: &GeneratorMatrix, lambda: f64, fs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if !(lambda > 0.0) {
        return Err(Error::Constraint(format!("resolvent needs lambda > 0, got {lambda}")));
    }
    let diag: Vec<f64> = gen.nu.iter().map(|v| v + lambda).collect();
    SpdSolver::new(&diag, &gen.offdiag)?.solve_many(fs)
}

impl GeneratorMatrix {
    /// The same window with exits suppressed (reflecting boundary): `ν` is replaced by the
    /// interior row sum and nothing is killed.
    pub fn reflecting(&self) -> GeneratorMatrix {
        let mut g = self.clone();
        for i in 0..g.len() {
            g.nu[i] = g.offdiag.row_sum(i);
            g.kill[i] = 0.0;
        }
        g.targets = None;
        g
    }

    /// `(−L) u` evaluated directly from the sparse rows.
    pub fn apply_neg(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.offdiag.matvec(u, &mut out);
        for i in 0..out.len() {
            out[i] = self.nu[i] * u[i] - out[i];
        }
        out
    }
}
