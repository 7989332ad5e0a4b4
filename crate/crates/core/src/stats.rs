//! Streaming moments, confidence intervals and goodness-of-fit statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Welford accumulator; merging is exact up to rounding and order-independent in value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(mut self, o: Moments) -> Moments {
        if o.n == 0 {
            return self;
        }
        if self.n == 0 {
            return o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64;
        self.n = n;
        self
    }

    pub fn from_slice(xs: &[f64]) -> Moments {
        let mut m = Moments::default();
        xs.iter().for_each(|x| m.push(*x));
        m
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_err(&self) -> f64 {
        (self.variance() / self.n.max(1) as f64).sqrt()
    }
}

/// Standard error of the sample variance estimated from the fourth central moment.
pub fn variance_std_err(xs: &[f64]) -> f64 {
    let m = Moments::from_slice(xs);
    let n = xs.len() as f64;
    let m4 = xs.iter().map(|x| (x - m.mean).powi(4)).sum::<f64>() / n;
    let s2 = m.variance();
    ((m4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

/// Wilson score interval for `k` successes out of `n` at `z` standard deviations.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let den = 1.0 + z * z / n;
    let c = (p + z * z / (2.0 * n)) / den;
    let h = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / den;
    let lo = if k == 0 { 0.0 } else { (c - h).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (c + h).min(1.0) };
    (lo, hi)
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("positive sd").cdf(x)
}

/// Kolmogorov–Smirnov distance between the samples and a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov–Smirnov distance for samples supported on a lattice of span `h`, with the
/// reference CDF evaluated at the midpoints between atoms (continuity correction).
pub fn ks_lattice(samples: &[f64], h: f64, cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < s.len() {
        let a = s[i];
        let mut j = i;
        while j < s.len() && s[j] <= a + 1e-9 * h {
            j += 1;
        }
        d = d.max((i as f64 / n - cdf(a - h / 2.0)).abs());
        d = d.max((j as f64 / n - cdf(a + h / 2.0)).abs());
        i = j;
    }
    d
}

/// Asymptotic Kolmogorov tail `P(sup|B| > √n d)`.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let l = (n as f64).sqrt() * d;
    if l < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * l * l).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Pearson chi-square p-value; cells with zero expectation must have zero counts.
pub fn chi_square_pvalue(observed: &[u64], expected: &[f64]) -> f64 {
    let mut stat = 0.0;
    let mut cells = 0;
    for (o, e) in observed.iter().zip(expected) {
        if *e > 0.0 {
            stat += (*o as f64 - e).powi(2) / e;
            cells += 1;
        } else if *o > 0 {
            return 0.0;
        }
    }
    if cells < 2 {
        return 1.0;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).expect("dof").cdf(stat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 * 0.3).collect();
        let whole = Moments::from_slice(&xs);
        let parts = Moments::from_slice(&xs[..40]).merge(Moments::from_slice(&xs[40..]));
        assert_eq!(whole.n, parts.n);
        assert!((whole.mean - parts.mean).abs() < 1e-13);
        assert!((whole.m2 - parts.m2).abs() < 1e-10);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson(30, 100, 3.0);
        assert!(lo < 0.3 && 0.3 < hi);
        assert_eq!(wilson(0, 10, 3.0).0, 0.0);
    }

    #[test]
    fn ks_uniform_small() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_statistic(&xs, |x| x.clamp(0.0, 1.0)) <= 0.0005 + 1e-12);
    }
}
