//! Poisson-mixture evaluation of `e^{tL}` with certified truncation.

use crate::error::{Error, Result};
use crate::generator::RateOperator;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Target for the certified Poisson right tail of every series.
pub const SERIES_TAIL_TARGET: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonSeries {
    /// Dominating rate `Λ`.
    pub rate: f64,
    /// `Λ t`.
    pub mean: f64,
    /// Last power included.
    pub order: usize,
    /// Certified bound on the omitted Poisson mass.
    pub tail: f64,
}

fn log_pmf(mean: f64, k: usize) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mean.ln() - mean - ln_gamma(k as f64 + 1.0)
}

/// Poisson weights `0..=K` with the smallest `K` whose certified tail
/// `pmf(K+1) / (1 − m/(K+2))` is at most `target`.
pub fn poisson_weights(mean: f64, target: f64) -> (Vec<f64>, f64) {
    assert!(mean >= 0.0 && mean.is_finite());
    if mean == 0.0 {
        return (vec![1.0], 0.0);
    }
    let mut w = Vec::new();
    let mut k = 0usize;
    loop {
        w.push(log_pmf(mean, k).exp());
        let kk = (k + 2) as f64;
        if kk > mean {
            let tail = log_pmf(mean, k + 1).exp() / (1.0 - mean / kk);
            if tail <= target {
                return (w, tail);
            }
        }
        k += 1;
    }
}

/// `e^{t_i L} v0` for every `t_i` from one shared sequence of powers of `I + L/Λ`.
pub fn propagate(op: &dyn RateOperator, v0: &[f64], times: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<PoissonSeries>)> {
    let rate = op.max_rate();
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::Assembly(format!("uniformization rate must be positive, got {rate}")));
    }
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::Constraint("times must be finite and nonnegative".into()));
    }
    let n = op.len();
    let series: Vec<(Vec<f64>, f64)> = times.iter().map(|t| poisson_weights(rate * t, SERIES_TAIL_TARGET)).collect();
    let kmax = series.iter().map(|s| s.0.len()).max().unwrap_or(1);
    let mut acc: Vec<Vec<f64>> = vec![vec![0.0; n]; times.len()];
    let mut v = v0.to_vec();
    let mut lv = vec![0.0; n];
    for k in 0..kmax {
        if k > 0 {
            op.apply(&v, &mut lv);
            for i in 0..n {
                v[i] += lv[i] / rate;
            }
        }
        for (a, s) in acc.iter_mut().zip(&series) {
            if let Some(&w) = s.0.get(k) {
                if w != 0.0 {
                    for i in 0..n {
                        a[i] += w * v[i];
                    }
                }
            }
        }
    }
    let info = times
        .iter()
        .zip(&series)
        .map(|(t, s)| PoissonSeries { rate, mean: rate * t, order: s.0.len() - 1, tail: s.1 })
        .collect();
    Ok((acc, info))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for m in [0.1, 1.0, 17.0, 450.0, 2000.0] {
            let (w, tail) = poisson_weights(m, 1e-13);
            let s: f64 = w.iter().sum();
            assert!(tail <= 1e-13);
            assert!((s + tail - 1.0).abs() < 1e-11, "m={m} s={s}");
        }
    }
}
