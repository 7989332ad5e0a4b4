use crate::lattice::{shell_count_bound, unit_ball_volume};

/// Number of shells summed explicitly before switching to the integral remainder.
const EXPLICIT_SHELLS: usize = 4096;

/// Decreasing envelope φ with `C(x, y) ≤ φ(|x − y|)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Envelope {
    /// `φ(r) = scale · (offset + r)^(−exponent)`.
    PowerLaw { scale: f64, offset: f64, exponent: f64 },
    /// Finite support: `φ(r) = max { w : (ρ, w) with ρ ≥ r }`, zero past the last radius.
    /// Entries are sorted by radius.
    Step(Vec<(f64, f64)>),
}

impl Envelope {
    /// Build a step envelope from `(|z|, weight)` pairs.
    pub fn step_from(pairs: impl IntoIterator<Item = (f64, f64)>) -> Envelope {
        let mut v: Vec<(f64, f64)> = pairs.into_iter().filter(|p| p.1 > 0.0).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        // suffix maximum so that value() is a single lookup
        let mut m = 0.0f64;
        for e in v.iter_mut().rev() {
            m = m.max(e.1);
            e.1 = m;
        }
        Envelope::Step(v)
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            Envelope::PowerLaw { scale, offset, exponent } => {
                if offset + r <= 0.0 {
                    f64::INFINITY
                } else {
                    scale * (offset + r).powf(-exponent)
                }
            }
            Envelope::Step(v) => {
                // first entry with radius ≥ r
                let idx = v.partition_point(|e| e.0 < r - 1e-12);
                v.get(idx).map_or(0.0, |e| e.1)
            }
        }
    }

    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Envelope::PowerLaw { .. } => None,
            Envelope::Step(v) => Some(v.last().map_or(0.0, |e| e.0)),
        }
    }

    /// Certified bound on `Σ_{|z| > r} |z|^m φ(|z|)` over `z ∈ Z^d`, for `m ∈ {0, 2}`,
    /// using shells `(i, i+1]`, `i ≥ ⌊r⌋`.
    pub fn tail_moment(&self, dim: usize, r: f64, m: i32) -> f64 {
        let i0 = r.max(0.0).floor() as usize;
        if let Some(sr) = self.support_radius() {
            if r >= sr {
                return 0.0;
            }
            let last = sr.ceil() as usize;
            return (i0..=last)
                .map(|i| shell_count_bound(dim, i as f64) * self.value(i as f64) * ((i + 1) as f64).powi(m))
                .sum();
        }
        let Envelope::PowerLaw { scale, offset, exponent } = *self else { unreachable!() };
        let i1 = i0 + EXPLICIT_SHELLS;
        let mut s = 0.0;
        for i in i0..=i1 {
            s += shell_count_bound(dim, i as f64) * self.value(i as f64) * ((i + 1) as f64).powi(m);
        }
        // integral remainder for i > i1
        let d = dim as f64;
        let p = exponent - d - m as f64;
        if p <= 0.0 {
            return f64::INFINITY;
        }
        let big = i1 as f64;
        let h = d.sqrt() / 2.0;
        let (k, lead) = if dim == 1 {
            (2.0 * scale, 0.0)
        } else {
            (scale * unit_ball_volume(dim) * d * (1.0 + 2.0 * h), d - 1.0)
        };
        let rho = ((big + 2.0 + h) / (big + 1.0 + offset)).max(1.0);
        let rho2 = ((big + 2.0) / (big + 1.0 + offset)).max(1.0);
        let coef = k * rho.powf(lead) * rho2.powi(m);
        s + coef * (big + offset).powf(-p) / p
    }

    /// `sup_{1 ≤ i ≤ imax, φ(i) > 0} φ(2i)/φ(i)`.
    pub fn doubling_constant(&self, imax: usize) -> f64 {
        (1..=imax)
            .filter(|&i| self.value(i as f64) > 0.0)
            .map(|i| self.value(2.0 * i as f64) / self.value(i as f64))
            .fold(0.0, f64::max)
    }

    /// Partial sums of `i^{d+1} φ(i)` at `imax/2` and `imax`; the audit checks they settle.
    pub fn summability(&self, dim: usize, imax: usize) -> (f64, f64) {
        let mut half = 0.0;
        let mut full = 0.0;
        for i in 1..=imax {
            full += (i as f64).powi(dim as i32 + 1) * self.value(i as f64);
            if i == imax / 2 {
                half = full;
            }
        }
        (half, full)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::offsets_within;

    #[test]
    fn power_law_tail_dominates_brute_force() {
        for dim in 1..=2 {
            let env = Envelope::PowerLaw { scale: 1.0, offset: 0.0, exponent: dim as f64 + 4.0 };
            let zs = offsets_within(dim, 200.0);
            for r in [1.0, 3.0, 10.0, 40.0] {
                let brute: f64 = zs
                    .iter()
                    .filter(|z| z.norm() > r)
                    .map(|z| env.value(z.norm()))
                    .sum();
                let bound = env.tail_moment(dim, r, 0);
                assert!(bound >= brute, "d={dim} r={r} bound={bound} brute={brute}");
                assert!(bound < 60.0 * brute + 1e-12, "bound too loose: {bound} vs {brute}");
            }
        }
    }

    #[test]
    fn step_envelope_lookup() {
        let e = Envelope::step_from([(1.0, 1.0), (2.0, 3.0), (8.0, 0.5)]);
        assert_eq!(e.value(1.0), 3.0);
        assert_eq!(e.value(2.0), 3.0);
        assert_eq!(e.value(2.5), 0.5);
        assert_eq!(e.value(9.0), 0.0);
        assert_eq!(e.tail_moment(1, 8.0, 0), 0.0);
    }
}
