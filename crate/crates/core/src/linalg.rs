//! Sparse rows, dense factorizations (via faer), and a preconditioned CG fallback.

use crate::error::{Error, Result};
use faer::prelude::*;
use faer::{Mat, Side};

/// Compressed sparse rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> CsrMatrix {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix { n_rows: indptr.len() - 1, n_cols, indptr, indices, values }
    }

    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        match self.indices[a..b].binary_search(&j) {
            Ok(k) => self.values[a + k],
            Err(_) => 0.0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `out = A x`.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n_rows {
            let mut s = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            out[i] = s;
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.values[self.indptr[i]..self.indptr[i + 1]].iter().sum()
    }

    /// Coordinate-format text, one `row col value` triple per line (0-based).
    pub fn write_coo<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                writeln!(w, "{i} {j} {v:e}")?;
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                m.write(i, j, m.read(i, j) + v);
            }
        }
        m
    }
}

/// Neumaier-compensated summation. Jump lists run to 10⁵–10⁶ terms, where a plain sum
/// drifts by ~n·ε and breaks the row identity `ν = Σ_in C + kill` at the 1e-11 level.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

pub fn compensated_sum(it: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = CompensatedSum::default();
    it.into_iter().for_each(|x| s.add(x));
    s.value()
}

/// Dense systems above this size go to the iterative solver.
pub const DENSE_CAP: usize = 6000;

/// A factorized symmetric positive definite matrix `M = diag − offdiag`.
pub enum SpdSolver {
    Dense { chol: faer::solvers::Cholesky<f64>, diag: Vec<f64>, off: CsrMatrix },
    Iterative { diag: Vec<f64>, off: CsrMatrix },
}

impl SpdSolver {
    /// Factor `diag(d) − off` where `off` has nonnegative entries.
    pub fn new(diag: &[f64], off: &CsrMatrix) -> Result<SpdSolver> {
        let n = diag.len();
        if n <= DENSE_CAP {
            let mut m = Mat::<f64>::zeros(n, n);
            for i in 0..n {
                m.write(i, i, diag[i]);
                for (j, v) in off.row(i) {
                    m.write(i, j, m.read(i, j) - v);
                }
            }
            let chol = m
                .cholesky(Side::Lower)
                .map_err(|_| Error::Singular("matrix is not positive definite (window not absorbing?)".into()))?;
            Ok(SpdSolver::Dense { chol, diag: diag.to_vec(), off: off.clone() })
        } else {
            if diag.iter().any(|&d| !(d > 0.0)) {
                return Err(Error::Singular("nonpositive diagonal".into()));
            }
            Ok(SpdSolver::Iterative { diag: diag.to_vec(), off: off.clone() })
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SpdSolver::Dense { diag, .. } | SpdSolver::Iterative { diag, .. } => diag.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            SpdSolver::Dense { .. } => Ok(self.solve_many(std::slice::from_ref(&b.to_vec()))?.remove(0)),
            SpdSolver::Iterative { diag, off } => cg(diag, off, b, 1e-14, 20 * diag.len() + 1000),
        }
    }

    /// Solve for many right-hand sides given as columns, with one round of iterative
    /// refinement for the dense path.
    pub fn solve_many(&self, cols: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        match self {
            SpdSolver::Dense { chol, diag, off } => {
                if cols.is_empty() {
                    return Ok(vec![]);
                }
                let n = diag.len();
                let rhs = Mat::<f64>::from_fn(n, cols.len(), |i, j| cols[j][i]);
                let x = chol.solve(&rhs);
                let mut out: Vec<Vec<f64>> = (0..cols.len()).map(|j| (0..n).map(|i| x.read(i, j)).collect()).collect();
                let mut tmp = vec![0.0; n];
                let resid = Mat::<f64>::from_fn(n, cols.len(), |_, _| 0.0);
                let mut resid = resid;
                for (j, xj) in out.iter().enumerate() {
                    off.matvec(xj, &mut tmp);
                    for i in 0..n {
                        resid.write(i, j, cols[j][i] - (diag[i] * xj[i] - tmp[i]));
                    }
                }
                let dx = chol.solve(&resid);
                for (j, xj) in out.iter_mut().enumerate() {
                    for i in 0..n {
                        xj[i] += dx.read(i, j);
                    }
                }
                Ok(out)
            }
            SpdSolver::Iterative { .. } => cols.iter().map(|c| self.solve(c)).collect(),
        }
    }
}

/// Jacobi-preconditioned conjugate gradients on `diag(d) − off`.
pub fn cg(diag: &[f64], off: &CsrMatrix, b: &[f64], rtol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = diag.len();
    let apply = |x: &[f64], out: &mut [f64]| {
        off.matvec(x, out);
        for i in 0..n {
            out[i] = diag[i] * x[i] - out[i];
        }
    };
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for it in 0..max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::Singular(format!("CG breakdown at iteration {it}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn <= rtol * bnorm {
            // recompute the true residual to guard against drift
            let mut ax = vec![0.0; n];
            apply(&x, &mut ax);
            let true_r = ax.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if true_r <= 10.0 * rtol * bnorm {
                return Ok(x);
            }
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let res = ax.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / bnorm;
    Err(Error::NonConvergence { iterations: max_iter, residual: res })
}

/// Solve a general dense system with partial-pivot LU.
pub fn dense_lu_solve(a: &Mat<f64>, cols: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.nrows();
    if cols.is_empty() {
        return Ok(vec![]);
    }
    let lu = a.partial_piv_lu();
    let rhs = Mat::<f64>::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let x = lu.solve(&rhs);
    let out: Vec<Vec<f64>> = (0..cols.len()).map(|j| (0..n).map(|i| x.read(i, j)).collect()).collect();
    if out.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Singular("LU produced non-finite values".into()));
    }
    Ok(out)
}

/// Inverse of `diag(d) − off` as a dense matrix (row-major `Vec<Vec<f64>>`).
pub fn spd_inverse(diag: &[f64], off: &CsrMatrix) -> Result<Vec<Vec<f64>>> {
    let n = diag.len();
    if n > DENSE_CAP {
        return Err(Error::SizeExceeded { size: n, cap: DENSE_CAP, suggestion: DENSE_CAP });
    }
    let solver = SpdSolver::new(diag, off)?;
    let SpdSolver::Dense { chol, .. } = &solver else { unreachable!() };
    let inv = chol.inverse();
    Ok((0..n).map(|i| (0..n).map(|j| inv.read(i, j)).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_laplacian(n: usize) -> (Vec<f64>, CsrMatrix) {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![];
                if i > 0 {
                    r.push((i - 1, 1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, 1.0));
                }
                r
            })
            .collect();
        (vec![2.0; n], CsrMatrix::from_rows(n, rows))
    }

    #[test]
    fn cg_matches_dense() {
        let (d, off) = path_laplacian(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let x1 = SpdSolver::new(&d, &off).unwrap().solve(&b).unwrap();
        let x2 = cg(&d, &off, &b, 1e-14, 10_000).unwrap();
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
