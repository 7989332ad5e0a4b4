//! Lattice points of `Z^d` (d ≤ 3) and ball/offset enumeration.
//!
//! Balls follow the strict convention `B(x, r) = { y : |x − y| < r }` in the
//! Euclidean norm.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Neg, Sub};

pub const MAX_DIM: usize = 3;

/// A point of `Z^d`. Coordinates beyond the working dimension are kept at zero.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site(pub [i64; MAX_DIM]);

impl Site {
    pub const ORIGIN: Site = Site([0; MAX_DIM]);

    pub fn new(coords: &[i64]) -> Site {
        assert!(coords.len() <= MAX_DIM, "dimension {} > {}", coords.len(), MAX_DIM);
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Site(c)
    }

    pub fn unit(axis: usize) -> Site {
        let mut c = [0; MAX_DIM];
        c[axis] = 1;
        Site(c)
    }

    pub fn axis(axis: usize, v: i64) -> Site {
        let mut c = [0; MAX_DIM];
        c[axis] = v;
        Site(c)
    }

    pub fn coords(&self, dim: usize) -> &[i64] {
        &self.0[..dim]
    }

    pub fn norm2(&self) -> i64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        (self.norm2() as f64).sqrt()
    }

    pub fn dist(&self, other: &Site) -> f64 {
        (*self - *other).norm()
    }

    pub fn scale(&self, k: i64) -> Site {
        Site([self.0[0] * k, self.0[1] * k, self.0[2] * k])
    }

    /// Lexicographic sign: +1 if the first nonzero coordinate is positive.
    pub fn lex_sign(&self) -> i32 {
        for &c in &self.0 {
            if c != 0 {
                return c.signum() as i32;
            }
        }
        0
    }

    /// Componentwise Euclidean remainder modulo `period` (entries ≥ 1).
    pub fn rem(&self, period: &Site) -> Site {
        Site([
            self.0[0].rem_euclid(period.0[0]),
            self.0[1].rem_euclid(period.0[1]),
            self.0[2].rem_euclid(period.0[2]),
        ])
    }

    pub fn to_f64(&self, dim: usize) -> Vec<f64> {
        self.0[..dim].iter().map(|&c| c as f64).collect()
    }
}

impl Add for Site {
    type Output = Site;
    fn add(self, o: Site) -> Site {
        Site([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Site {
    type Output = Site;
    fn sub(self, o: Site) -> Site {
        Site([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Site {
    type Output = Site;
    fn neg(self) -> Site {
        Site([-self.0[0], -self.0[1], -self.0[2]])
    }
}

/// `|z|² < r²` with the comparison done exactly when `r²` is an integer.
#[inline]
pub fn within_open(norm2: i64, r: f64) -> bool {
    (norm2 as f64) < r * r
}

#[inline]
pub fn within_closed(norm2: i64, r: f64) -> bool {
    (norm2 as f64) <= r * r
}

/// All points of the box `[lo, hi]` (inclusive) in lexicographic order.
pub fn box_sites(dim: usize, lo: &Site, hi: &Site) -> Vec<Site> {
    let mut out = Vec::new();
    if (0..dim).any(|a| hi.0[a] < lo.0[a]) {
        return out;
    }
    let mut cur = *lo;
    loop {
        out.push(cur);
        let mut axis = dim;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if cur.0[axis] < hi.0[axis] {
                cur.0[axis] += 1;
                break;
            }
            cur.0[axis] = lo.0[axis];
        }
    }
}

/// Sites of the open ball `B(center, r)`, lexicographically sorted.
pub fn ball_sites(dim: usize, center: &Site, r: f64) -> Vec<Site> {
    let k = r.ceil() as i64;
    let lo = *center - Site::new(&vec![k; dim]);
    let hi = *center + Site::new(&vec![k; dim]);
    box_sites(dim, &lo, &hi)
        .into_iter()
        .filter(|s| within_open((*s - *center).norm2(), r))
        .collect()
}

/// Nonzero offsets `z` with `|z| ≤ r` (closed), lexicographically sorted.
pub fn offsets_within(dim: usize, r: f64) -> Vec<Site> {
    let k = r.floor() as i64;
    let lo = Site::new(&vec![-k; dim]);
    let hi = Site::new(&vec![k; dim]);
    box_sites(dim, &lo, &hi)
        .into_iter()
        .filter(|s| *s != Site::ORIGIN && within_closed(s.norm2(), r))
        .collect()
}

/// Volume of the Euclidean unit ball in dimension `d`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 / 3.0 * std::f64::consts::PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Upper bound on `#{z ∈ Z^d : i < |z| ≤ i + 1}` by comparing unit cubes
/// centred at lattice points with the annulus widened by half a diagonal.
pub fn shell_count_bound(dim: usize, i: f64) -> f64 {
    if dim == 1 {
        return 2.0;
    }
    let h = (dim as f64).sqrt() / 2.0;
    let v = unit_ball_volume(dim);
    let outer = (i + 1.0 + h).powi(dim as i32);
    let inner = (i - h).max(0.0).powi(dim as i32);
    v * (outer - inner)
}

pub fn check_dim(dim: usize) -> crate::Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(crate::Error::Constraint(format!(
            "dimension must be in 1..={MAX_DIM}, got {dim}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_is_strict() {
        let b = ball_sites(2, &Site::ORIGIN, 1.0);
        assert_eq!(b, vec![Site::ORIGIN]);
        let b = ball_sites(2, &Site::ORIGIN, 2.0);
        // |y| < 2: origin, 4 unit, 4 diagonal
        assert_eq!(b.len(), 9);
    }

    #[test]
    fn shell_bound_dominates_count() {
        for dim in 1..=3 {
            let all = offsets_within(dim, 30.0);
            for i in 0..29 {
                let cnt = all
                    .iter()
                    .filter(|z| {
                        let n = z.norm();
                        n > i as f64 && n <= i as f64 + 1.0
                    })
                    .count() as f64;
                assert!(cnt <= shell_count_bound(dim, i as f64), "d={dim} i={i} cnt={cnt}");
            }
        }
    }

    #[test]
    fn box_enumeration_order() {
        let s = box_sites(2, &Site::new(&[0, 0]), &Site::new(&[1, 2]));
        assert_eq!(s.len(), 6);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }
}
