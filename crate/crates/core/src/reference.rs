//! Closed-form values for the nearest-neighbour walk, used as oracles.

use statrs::function::gamma::ln_gamma;

/// `e^{−2t} I_k(2t)` with a certified bound on the omitted series terms:
/// the transition density of the rate-2 nearest-neighbour walk on `Z` from 0 to `k`.
pub fn bessel_kernel(t: f64, k: i64) -> (f64, f64) {
    let k = k.unsigned_abs() as f64;
    if t == 0.0 {
        return (if k == 0.0 { 1.0 } else { 0.0 }, 0.0);
    }
    let lt = t.ln();
    let term = |m: f64| ((2.0 * m + k) * lt - 2.0 * t - ln_gamma(m + 1.0) - ln_gamma(m + k + 1.0)).exp();
    let mut sum = 0.0;
    let mut m = 0.0;
    loop {
        let a = term(m);
        sum += a;
        // Successive term ratios t²/((m+1)(m+1+k)) decrease in m.
        let r = t * t / ((m + 1.0) * (m + 1.0 + k));
        if r < 0.5 {
            let tail = a * r / (1.0 - r);
            if tail <= 1e-17 * sum.max(1e-300) || tail < 1e-300 {
                return (sum, tail);
            }
        }
        m += 1.0;
    }
}

/// `p(t, x, y)` for the nearest-neighbour walk with unit conductances in dimension `d`
/// (the coordinates are independent rate-2 walks).
pub fn nearest_neighbor_kernel(t: f64, x: &[i64], y: &[i64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| bessel_kernel(t, b - a).0).product()
}

/// `lim_{t→∞} √t · e^{−2t} I_0(2t)`.
pub fn bessel_plateau() -> f64 {
    1.0 / (2.0 * std::f64::consts::PI.sqrt())
}

/// `P^x(hit 0 before m+1)` for the nearest-neighbour walk on `{1..m}`.
pub fn gamblers_ruin(x: i64, m: i64) -> f64 {
    1.0 - x as f64 / (m + 1) as f64
}

/// Green function of the unit nearest-neighbour walk killed outside `{1..m}`.
pub fn interval_green(x: i64, y: i64, m: i64) -> f64 {
    let (a, b) = (x.min(y), x.max(y));
    (a * (m + 1 - b)) as f64 / (m + 1) as f64
}

/// `E^0 τ` for the unit nearest-neighbour walk on `Z` leaving the open ball `B(0, r)`.
pub fn interval_exit_time(r: i64) -> f64 {
    (r * r) as f64 / 2.0
}

/// Variance of a coordinate of the rate-`c` nearest-neighbour walk at time `t`
/// (a difference of two independent Poisson processes of rate `c`).
pub fn poisson_difference_variance(c: f64, t: f64) -> f64 {
    2.0 * c * t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_t_expansion() {
        let (p, _) = bessel_kernel(1e-6, 0);
        assert!((p - (1.0 - 2e-6)).abs() < 1e-11);
    }

    #[test]
    fn kernel_sums_to_one() {
        let t = 4.0;
        let s: f64 = (-80..=80).map(|k| bessel_kernel(t, k).0).sum();
        assert!((s - 1.0).abs() < 1e-13);
    }

    #[test]
    fn plateau_approached() {
        let t = 4000.0;
        let v = bessel_kernel(t, 0).0 * t.sqrt();
        // The first correction is 1/(16 t).
        assert!((v / bessel_plateau() - 1.0).abs() < 1e-4);
    }
}
