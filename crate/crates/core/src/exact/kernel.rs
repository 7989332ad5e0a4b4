use super::uniformization::{propagate, PoissonSeries};
use crate::error::{Error, Result};
use crate::generator::RateOperator;
use crate::lattice::Site;
use crate::window::LatticeWindow;
use rayon::prelude::*;
use std::io::Write;
use std::sync::Arc;

/// `p(t, x, y) = P^x(Y_t = y)` on a window, for a set of sources and times.
#[derive(Clone, Debug)]
pub struct KernelTable {
    pub window: Arc<LatticeWindow>,
    pub times: Vec<f64>,
    pub sources: Vec<Site>,
    /// `values[source][time][site]`.
    pub values: Vec<Vec<Vec<f64>>>,
    /// True when the kernel is meant as a killed kernel; false when the window only
    /// approximates the whole-lattice kernel (leakage is then an error term).
    pub killed: bool,
    pub series: Vec<PoissonSeries>,
}

pub fn heat_kernel(op: &dyn RateOperator, times: &[f64], sources: &[Site], killed: bool) -> Result<KernelTable> {
    let window = op.window().clone();
    let idx: Vec<usize> = sources
        .iter()
        .map(|s| window.index_of(s).ok_or_else(|| Error::Constraint(format!("source {:?} not in window", s.0))))
        .collect::<Result<_>>()?;
    let runs: Vec<(Vec<Vec<f64>>, Vec<PoissonSeries>)> = idx
        .par_iter()
        .map(|&i| {
            let mut v0 = vec![0.0; op.len()];
            v0[i] = 1.0;
            propagate(op, &v0, times)
        })
        .collect::<Result<_>>()?;
    let series = runs.first().map(|r| r.1.clone()).unwrap_or_default();
    Ok(KernelTable {
        window,
        times: times.to_vec(),
        sources: sources.to_vec(),
        values: runs.into_iter().map(|r| r.0).collect(),
        killed,
        series,
    })
}

impl KernelTable {
    pub fn source_index(&self, x: &Site) -> Option<usize> {
        self.sources.iter().position(|s| s == x)
    }

    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|s| (*s - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    /// `p(times[ti], sources[si], y)`; zero outside the window.
    pub fn p(&self, ti: usize, si: usize, y: &Site) -> f64 {
        self.window.index_of(y).map_or(0.0, |j| self.values[si][ti][j])
    }

    pub fn row(&self, ti: usize, si: usize) -> &[f64] {
        &self.values[si][ti]
    }

    pub fn mass(&self, ti: usize, si: usize) -> f64 {
        self.values[si][ti].iter().sum()
    }

    /// Mass lost to the boundary (and series truncation) by `times[ti]`.
    pub fn leakage(&self, ti: usize, si: usize) -> f64 {
        (1.0 - self.mass(ti, si)).max(0.0)
    }

    /// CSV with columns `t, x_1..x_d, y_1..y_d, value`; entries below `floor` are skipped.
    pub fn write_csv<W: Write>(&self, w: W, floor: f64) -> Result<()> {
        let d = self.window.dim();
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("x{i}")));
        header.extend((1..=d).map(|i| format!("y{i}")));
        header.push("value".into());
        wtr.write_record(&header)?;
        for (si, src) in self.sources.iter().enumerate() {
            for (ti, t) in self.times.iter().enumerate() {
                for (j, y) in self.window.sites().iter().enumerate() {
                    let v = self.values[si][ti][j];
                    if v.abs() < floor {
                        continue;
                    }
                    let mut rec = vec![format!("{t}")];
                    rec.extend(src.coords(d).iter().map(|c| c.to_string()));
                    rec.extend(y.coords(d).iter().map(|c| c.to_string()));
                    rec.push(format!("{v:e}"));
                    wtr.write_record(&rec)?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}
