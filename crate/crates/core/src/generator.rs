//! Generator and transition-matrix assembly on finite windows, plus the matrix-free
//! operators used by the uniformization series.

use crate::conductance::{vertex_weight, ConductanceModel};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::linalg::{CompensatedSum, CsrMatrix};
use crate::window::{ExteriorPolicy, LatticeWindow, WindowShape};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

/// Default cap on the number of window sites.
pub const DEFAULT_SITE_CAP: usize = 4_000_000;

#[derive(Clone, Debug)]
pub struct GeneratorOptions {
    /// Per-site tail tolerance for the truncation radius `R*`.
    pub tol: f64,
    pub site_cap: usize,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions { tol: 1e-12, site_cap: DEFAULT_SITE_CAP }
    }
}

/// Exit rates towards individually tracked exterior sites.
#[derive(Clone, Debug)]
pub struct ExteriorTargets {
    pub sites: Vec<Site>,
    pub index: HashMap<Site, usize>,
    /// `N × M` rates `C(x, w)`.
    pub rates: CsrMatrix,
    /// Exit rate towards untracked exterior sites (aggregated far field).
    pub far: Vec<f64>,
}

/// Generator of `Y` restricted to a window: `L = offdiag − diag(ν)`; mass leaving the
/// window is killed at rate `kill`. Jumps longer than `R*` are deleted from the chain,
/// with the certified per-site defect recorded in `defect`.
#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    pub window: Arc<LatticeWindow>,
    pub offdiag: CsrMatrix,
    pub nu: Vec<f64>,
    pub kill: Vec<f64>,
    pub defect: Vec<f64>,
    pub r_star: f64,
    pub targets: Option<ExteriorTargets>,
}

/// Per-class jump list, `ν`, and tail shared by every site of the class.
pub(crate) struct JumpCache<'a> {
    model: &'a ConductanceModel,
    r_star: f64,
    tail: f64,
    by_class: HashMap<Site, Arc<(f64, Vec<(Site, f64)>)>>,
}

impl<'a> JumpCache<'a> {
    pub(crate) fn new(model: &'a ConductanceModel, tol: f64) -> Result<JumpCache<'a>> {
        let r_star = model.truncation_radius(tol, crate::conductance::DEFAULT_MAX_RADIUS)?;
        Ok(JumpCache { model, r_star, tail: model.tail_bound(r_star), by_class: HashMap::new() })
    }

    pub(crate) fn r_star(&self) -> f64 {
        self.r_star
    }

    pub(crate) fn tail(&self) -> f64 {
        self.tail
    }

    /// `(ν_x, jumps)` with `ν_x` summed in the same (sorted) order `vertex_weight` uses.
    pub(crate) fn get(&mut self, x: &Site) -> Arc<(f64, Vec<(Site, f64)>)> {
        let compute = |m: &ConductanceModel, r: f64| {
            let j = m.jumps(x, r);
            let nu = crate::linalg::compensated_sum(j.iter().map(|e| e.1));
            Arc::new((nu, j))
        };
        match self.model.class_of(x) {
            Some(c) => self.by_class.entry(c).or_insert_with(|| compute(self.model, self.r_star)).clone(),
            None => compute(self.model, self.r_star),
        }
    }
}

pub fn build_generator(model: &ConductanceModel, window: &LatticeWindow, tol: f64) -> Result<GeneratorMatrix> {
    build_generator_with(model, window, &GeneratorOptions { tol, ..Default::default() })
}

pub fn build_generator_with(
    model: &ConductanceModel,
    window: &LatticeWindow,
    opts: &GeneratorOptions,
) -> Result<GeneratorMatrix> {
    if model.dim() != window.dim() {
        return Err(Error::Assembly(format!("model dimension {} != window dimension {}", model.dim(), window.dim())));
    }
    let n = window.len();
    if n > opts.site_cap {
        let shrink = (opts.site_cap as f64 / n as f64).powf(1.0 / window.dim() as f64);
        return Err(Error::SizeExceeded { size: n, cap: opts.site_cap, suggestion: (n as f64 * shrink.powi(window.dim() as i32)) as usize });
    }
    let mut cache = JumpCache::new(model, opts.tol)?;
    let track = match window.policy() {
        ExteriorPolicy::Absorb => None,
        ExteriorPolicy::TrackTargets { radius } => Some(radius.unwrap_or(f64::INFINITY)),
    };
    let mut rows = Vec::with_capacity(n);
    let mut nu = Vec::with_capacity(n);
    let mut kill = Vec::with_capacity(n);
    let mut ext_rows: Vec<Vec<(Site, f64)>> = Vec::new();
    let mut far = Vec::new();
    let mut tracked = BTreeSet::new();
    for x in window.sites() {
        let entry = cache.get(x);
        let (nu_x, jumps) = (&entry.0, &entry.1);
        let mut row = Vec::new();
        let mut k = CompensatedSum::default();
        let mut ext = Vec::new();
        let mut f = CompensatedSum::default();
        for (z, w) in jumps {
            let y = *x + *z;
            match window.index_of(&y) {
                Some(j) => row.push((j, *w)),
                None => {
                    k.add(*w);
                    if let Some(tr) = track {
                        if window.distance_to(&y) <= tr {
                            ext.push((y, *w));
                            tracked.insert(y);
                        } else {
                            f.add(*w);
                        }
                    }
                }
            }
        }
        rows.push(row);
        nu.push(*nu_x);
        kill.push(k.value());
        if track.is_some() {
            ext_rows.push(ext);
            far.push(f.value());
        }
    }
    let targets = track.map(|_| {
        let sites: Vec<Site> = tracked.into_iter().collect();
        let index: HashMap<Site, usize> = sites.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let rows = ext_rows.into_iter().map(|r| r.into_iter().map(|(y, w)| (index[&y], w)).collect()).collect();
        ExteriorTargets { rates: CsrMatrix::from_rows(sites.len(), rows), sites, index, far }
    });
    Ok(GeneratorMatrix {
        window: Arc::new(window.clone()),
        offdiag: CsrMatrix::from_rows(n, rows),
        nu,
        kill,
        defect: vec![cache.tail(); n],
        r_star: cache.r_star(),
        targets,
    })
}

impl GeneratorMatrix {
    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    /// Diagonal entry `L(x, x) = −ν_x`.
    pub fn diagonal(&self, i: usize) -> f64 {
        -self.nu[i]
    }

    /// `max_x |row sum of (interior − ν + kill)|`, which should vanish up to rounding.
    pub fn row_balance_error(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.offdiag.row_sum(i) - self.nu[i] + self.kill[i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn symmetry_error(&self) -> f64 {
        let mut e: f64 = 0.0;
        for i in 0..self.len() {
            for (j, v) in self.offdiag.row(i) {
                e = e.max((v - self.offdiag.get(j, i)).abs());
            }
        }
        e
    }

    /// Coordinate-format export of the full generator (diagonal included).
    pub fn write_coo<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.len() {
            let mut wrote_diag = false;
            for (j, v) in self.offdiag.row(i) {
                if j > i && !wrote_diag {
                    writeln!(w, "{i} {i} {:e}", -self.nu[i])?;
                    wrote_diag = true;
                }
                writeln!(w, "{i} {j} {v:e}")?;
            }
            if !wrote_diag {
                writeln!(w, "{i} {i} {:e}", -self.nu[i])?;
            }
        }
        Ok(())
    }
}

/// Row-stochastic one-step law of `X` on a window; exterior mass goes to `kill`.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    pub window: Arc<LatticeWindow>,
    pub p: CsrMatrix,
    pub kill: Vec<f64>,
    pub nu: Vec<f64>,
}

/// Minimum `ν_x` accepted by [`transition_matrix`].
pub const NU_FLOOR: f64 = 1e-12;

pub fn transition_matrix(model: &ConductanceModel, window: &LatticeWindow, tol: f64) -> Result<TransitionMatrix> {
    let gen = build_generator(&model.clone(), &window.clone().with_policy(ExteriorPolicy::Absorb), tol)?;
    transition_from_generator(&gen)
}

pub fn transition_from_generator(gen: &GeneratorMatrix) -> Result<TransitionMatrix> {
    for (i, &nu) in gen.nu.iter().enumerate() {
        if !(nu >= NU_FLOOR) {
            return Err(Error::DegenerateSite { site: gen.window.site(i), nu, floor: NU_FLOOR });
        }
    }
    let rows = (0..gen.len())
        .map(|i| gen.offdiag.row(i).map(|(j, v)| (j, v / gen.nu[i])).collect())
        .collect();
    Ok(TransitionMatrix {
        window: gen.window.clone(),
        p: CsrMatrix::from_rows(gen.len(), rows),
        kill: gen.kill.iter().zip(&gen.nu).map(|(k, n)| k / n).collect(),
        nu: gen.nu.clone(),
    })
}

// ---------------------------------------------------------------------------
// Matrix-free operators

/// A killed generator `L` applied as `out = L x`.
pub trait RateOperator: Sync + Send {
    fn len(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `max_x ν_x`, the uniformization rate.
    fn max_rate(&self) -> f64;
    fn window(&self) -> &Arc<LatticeWindow>;
}

impl RateOperator for GeneratorMatrix {
    fn len(&self) -> usize {
        self.nu.len()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.offdiag.matvec(x, out);
        for i in 0..out.len() {
            out[i] -= self.nu[i] * x[i];
        }
    }
    fn max_rate(&self) -> f64 {
        self.nu.iter().copied().fold(0.0, f64::max)
    }
    fn window(&self) -> &Arc<LatticeWindow> {
        &self.window
    }
}

/// An operator with a subset of sites removed: mass entering them is killed and they
/// carry no mass (used for kernels killed on hitting a set).
pub struct Masked<'a> {
    pub inner: &'a dyn RateOperator,
    pub alive: Vec<bool>,
}

impl RateOperator for Masked<'_> {
    fn len(&self) -> usize {
        self.inner.len()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let xm: Vec<f64> = x.iter().zip(&self.alive).map(|(v, a)| if *a { *v } else { 0.0 }).collect();
        self.inner.apply(&xm, out);
        for (o, a) in out.iter_mut().zip(&self.alive) {
            if !a {
                *o = 0.0;
            }
        }
    }
    fn max_rate(&self) -> f64 {
        self.inner.max_rate()
    }
    fn window(&self) -> &Arc<LatticeWindow> {
        self.inner.window()
    }
}

/// The generator multiplied by a constant (rates `D²C` of the rescaled process).
pub struct Scaled<'a> {
    pub inner: &'a dyn RateOperator,
    pub factor: f64,
}

impl RateOperator for Scaled<'_> {
    fn len(&self) -> usize {
        self.inner.len()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.inner.apply(x, out);
        for o in out.iter_mut() {
            *o *= self.factor;
        }
    }
    fn max_rate(&self) -> f64 {
        self.inner.max_rate() * self.factor
    }
    fn window(&self) -> &Arc<LatticeWindow> {
        self.inner.window()
    }
}

/// FFT-based generator for translation-invariant models on box or ball windows:
/// `L x = mask · (K ∗ x) − ν x` with `K(z) = C(0, z)` for `|z| ≤ R*`.
pub struct ConvolutionGenerator {
    window: Arc<LatticeWindow>,
    dim: usize,
    lo: Site,
    /// Window extent per axis.
    ext: [usize; 3],
    /// FFT length per axis.
    len: [usize; 3],
    /// Grid index of each window site.
    grid_of: Vec<usize>,
    kernel_hat: Vec<Complex64>,
    ffts: Vec<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>,
    nu: f64,
    pub r_star: f64,
    pub defect: f64,
}

fn fft_friendly(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k % p == 0 {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

impl ConvolutionGenerator {
    pub fn new(model: &ConductanceModel, window: &LatticeWindow, tol: f64) -> Result<ConvolutionGenerator> {
        if !model.is_translation_invariant() {
            return Err(Error::Assembly("convolution generator needs a translation-invariant model".into()));
        }
        let dim = model.dim();
        let (nu, tail) = vertex_weight(model, &Site::ORIGIN, tol)?;
        let r_star = model.truncation_radius(tol, crate::conductance::DEFAULT_MAX_RADIUS)?;
        let (lo, hi) = window.bounding_box();
        let mut ext = [1usize; 3];
        let mut len = [1usize; 3];
        for a in 0..dim {
            ext[a] = (hi.0[a] - lo.0[a] + 1) as usize;
            let k = (r_star.floor() as usize).min(ext[a] - 1);
            len[a] = fft_friendly(ext[a] + k);
        }
        let total = len[0] * len[1] * len[2];
        if total > 64_000_000 {
            return Err(Error::SizeExceeded { size: total, cap: 64_000_000, suggestion: window.len() / 2 });
        }
        let grid = |c: [usize; 3]| (c[0] * len[1] + c[1]) * len[2] + c[2];
        let grid_of = window
            .sites()
            .iter()
            .map(|s| {
                let mut c = [0usize; 3];
                for a in 0..dim {
                    c[a] = (s.0[a] - lo.0[a]) as usize;
                }
                grid(c)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); total];
        let span = Site([
            ext[0] as i64 - 1,
            if dim > 1 { ext[1] as i64 - 1 } else { 0 },
            if dim > 2 { ext[2] as i64 - 1 } else { 0 },
        ]);
        for (z, w) in model.jumps(&Site::ORIGIN, r_star) {
            if (0..dim).any(|a| z.0[a].abs() > span.0[a]) {
                continue;
            }
            let mut c = [0usize; 3];
            for a in 0..dim {
                c[a] = z.0[a].rem_euclid(len[a] as i64) as usize;
            }
            kernel[grid(c)].re += w;
        }
        let mut planner = FftPlanner::new();
        let ffts: Vec<_> = (0..3).map(|a| (planner.plan_fft_forward(len[a]), planner.plan_fft_inverse(len[a]))).collect();
        let mut g = ConvolutionGenerator {
            window: Arc::new(window.clone()),
            dim,
            lo,
            ext,
            len,
            grid_of,
            kernel_hat: vec![],
            ffts,
            nu,
            r_star,
            defect: tail,
        };
        g.transform(&mut kernel, false);
        g.kernel_hat = kernel;
        Ok(g)
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let len = self.len;
        let mut line = Vec::new();
        for a in 0..self.dim {
            let n = len[a];
            if n == 1 {
                continue;
            }
            let stride: usize = len[a + 1..].iter().product();
            let outer: usize = len[..a].iter().product();
            let fft = if inverse { &self.ffts[a].1 } else { &self.ffts[a].0 };
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            line.resize(n, Complex64::new(0.0, 0.0));
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for k in 0..n {
                        line[k] = buf[base + k * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for k in 0..n {
                        buf[base + k * stride] = line[k];
                    }
                }
            }
        }
    }

    pub fn lower_corner(&self) -> Site {
        self.lo
    }

    pub fn extent(&self) -> [usize; 3] {
        self.ext
    }
}

impl RateOperator for ConvolutionGenerator {
    fn len(&self) -> usize {
        self.grid_of.len()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let total = self.kernel_hat.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        for (i, &g) in self.grid_of.iter().enumerate() {
            buf[g].re = x[i];
        }
        self.transform(&mut buf, false);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.transform(&mut buf, true);
        let scale = 1.0 / total as f64;
        for (i, &g) in self.grid_of.iter().enumerate() {
            out[i] = buf[g].re * scale - self.nu * x[i];
        }
    }
    fn max_rate(&self) -> f64 {
        self.nu
    }
    fn window(&self) -> &Arc<LatticeWindow> {
        &self.window
    }
}

/// Estimated work per application; used to decide between sparse rows and FFTs.
fn stencil_cost(model: &ConductanceModel, window: &LatticeWindow, tol: f64) -> Result<f64> {
    let r = model.truncation_radius(tol, crate::conductance::DEFAULT_MAX_RADIUS)?;
    let j = model.jumps(&Site::ORIGIN, r).len() as f64;
    Ok(j * window.len() as f64)
}

/// Generator for heat-kernel work: FFT convolution for translation-invariant models with
/// wide jump tables on box/ball windows, sparse rows otherwise.
pub fn build_operator(model: &ConductanceModel, window: &LatticeWindow, tol: f64) -> Result<Box<dyn RateOperator>> {
    let shaped = matches!(window.shape(), WindowShape::Box { .. } | WindowShape::Ball { .. });
    if model.is_translation_invariant() && shaped && window.dim() >= 2 && stencil_cost(model, window, tol)? > 5e6 {
        return Ok(Box::new(ConvolutionGenerator::new(model, window, tol)?));
    }
    Ok(Box::new(build_generator(model, window, tol)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductance::ModelSpec;

    #[test]
    fn convolution_matches_sparse_rows() {
        let m = ModelSpec::RadialHeavyTail { dim: 2, exponent: None, offset: 0.0, scale: 1.0 }.build().unwrap();
        for w in [
            LatticeWindow::cube(2, Site::ORIGIN, 7).unwrap(),
            LatticeWindow::ball(2, Site::new(&[1, -2]), 6.5).unwrap(),
        ] {
            let sparse = build_generator(&m, &w, 1e-4).unwrap();
            let conv = ConvolutionGenerator::new(&m, &w, 1e-4).unwrap();
            let x: Vec<f64> = (0..w.len()).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
            let mut a = vec![0.0; w.len()];
            let mut b = vec![0.0; w.len()];
            sparse.apply(&x, &mut a);
            conv.apply(&x, &mut b);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-11, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn nearest_neighbor_tridiagonal() {
        let m = ModelSpec::NearestNeighbor { dim: 1, c: 1.0 }.build().unwrap();
        let w = LatticeWindow::new_box(1, Site::new(&[0]), Site::new(&[4])).unwrap();
        let g = build_generator(&m, &w, 1e-12).unwrap();
        for i in 0..5 {
            assert_eq!(g.diagonal(i), -2.0);
            for j in 0..5 {
                let expect = if (i as i64 - j as i64).abs() == 1 { 1.0 } else { 0.0 };
                if i != j {
                    assert_eq!(g.offdiag.get(i, j), expect);
                }
            }
        }
        assert_eq!(g.kill, vec![1.0, 0.0, 0.0, 0.0, 1.0]);
    }
}
