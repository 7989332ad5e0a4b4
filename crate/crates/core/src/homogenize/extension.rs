use crate::error::{Error, Result};
use crate::lattice::{box_sites, Site};

/// Vertex values of `g` on the box `lo..=hi` of `n^{-1}Z^d`, extended multilinearly
/// on every cell `Q_n(k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionGrid {
    pub dim: usize,
    pub n: u64,
    pub lo: Site,
    pub hi: Site,
    /// Values in `box_sites` order.
    pub values: Vec<f64>,
}

impl ExtensionGrid {
    /// `R_n g`: samples `g` at the grid vertices.
    pub fn restrict(dim: usize, n: u64, lo: Site, hi: Site, g: impl Fn(&[f64]) -> f64) -> ExtensionGrid {
        let values = box_sites(dim, &lo, &hi)
            .iter()
            .map(|s| g(&(0..dim).map(|a| s.0[a] as f64 / n as f64).collect::<Vec<_>>()))
            .collect();
        ExtensionGrid { dim, n, lo, hi, values }
    }

    fn index(&self, s: &Site) -> usize {
        let mut idx = 0usize;
        for a in 0..self.dim {
            let w = (self.hi.0[a] - self.lo.0[a] + 1) as usize;
            idx = idx * w + (s.0[a] - self.lo.0[a]) as usize;
        }
        idx
    }

    pub fn vertex(&self, s: &Site) -> f64 {
        self.values[self.index(s)]
    }

    /// Cell corner and fractional position of `x`; the upper grid face belongs to the
    /// last cell.
    fn locate(&self, x: &[f64]) -> Result<(Site, Vec<f64>)> {
        let mut base = Site::ORIGIN;
        let mut frac = vec![0.0; self.dim];
        for a in 0..self.dim {
            let u = x[a] * self.n as f64;
            if u < self.lo.0[a] as f64 - 1e-12 || u > self.hi.0[a] as f64 + 1e-12 || self.hi.0[a] == self.lo.0[a] {
                return Err(Error::Extrapolation(x.to_vec()));
            }
            let b = (u.floor() as i64).clamp(self.lo.0[a], self.hi.0[a] - 1);
            base.0[a] = b;
            frac[a] = (u - b as f64).clamp(0.0, 1.0);
        }
        Ok((base, frac))
    }

    /// `E_n g (x)`.
    pub fn extend(&self, x: &[f64]) -> Result<f64> {
        let (base, frac) = self.locate(x)?;
        let mut v = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut w = 1.0;
            let mut s = base;
            for a in 0..self.dim {
                if corner >> a & 1 == 1 {
                    w *= frac[a];
                    s.0[a] += 1;
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                v += w * self.vertex(&s);
            }
        }
        Ok(v)
    }

    /// `∂_i E_n g (x)` inside a cell.
    pub fn gradient(&self, x: &[f64], i: usize) -> Result<f64> {
        let (base, frac) = self.locate(x)?;
        let mut v = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut w = 1.0;
            let mut s = base;
            for a in 0..self.dim {
                let up = corner >> a & 1 == 1;
                if up {
                    s.0[a] += 1;
                }
                w *= if a == i {
                    if up {
                        self.n as f64
                    } else {
                        -(self.n as f64)
                    }
                } else if up {
                    frac[a]
                } else {
                    1.0 - frac[a]
                };
            }
            v += w * self.vertex(&s);
        }
        Ok(v)
    }
}

/// Both sides of the cell-gradient identity on `Q_n(x0)`: the integral of `∂_i E_n g` over
/// the cell (two-point Gauss–Legendre per axis, exact for the multilinear blend), and the
/// face-difference sum `(2^{d−1} n^{d−1})^{-1} Σ_{z ∈ V_i(x0)} (g(z + e^i/n) − g(z))`.
pub fn cell_gradient_identity(grid: &ExtensionGrid, x0: &Site, i: usize) -> Result<(f64, f64)> {
    let d = grid.dim;
    let n = grid.n as f64;
    let nodes = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let mut lhs = 0.0;
    for q in 0..(1usize << d) {
        let x: Vec<f64> = (0..d).map(|a| (x0.0[a] as f64 + nodes[q >> a & 1]) / n).collect();
        lhs += grid.gradient(&x, i)?;
    }
    lhs *= n.powi(-(d as i32)) / (1usize << d) as f64;
    // V_i(x0): the 2^{d−1} vertices of the face of Q_n(x0) orthogonal to e^i through x0.
    let mut rhs = 0.0;
    for corner in 0..(1usize << d) {
        if corner >> i & 1 == 1 {
            continue;
        }
        let mut z = *x0;
        for a in 0..d {
            if corner >> a & 1 == 1 {
                z.0[a] += 1;
            }
        }
        rhs += grid.vertex(&(z + Site::unit(i))) - grid.vertex(&z);
    }
    rhs /= 2f64.powi(d as i32 - 1) * n.powi(d as i32 - 1);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_center_is_corner_average() {
        let g = ExtensionGrid { dim: 2, n: 1, lo: Site::ORIGIN, hi: Site::new(&[1, 1]), values: vec![1.0, 2.0, 3.0, 4.0] };
        assert!((g.extend(&[0.5, 0.5]).unwrap() - 2.5).abs() < 1e-15);
        assert!(g.extend(&[1.5, 0.5]).is_err());
    }
}
