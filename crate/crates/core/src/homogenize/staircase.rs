use crate::conductance::ConductanceModel;
use crate::lattice::{box_sites, Site};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub axis: usize,
    pub from: Site,
    pub to: Site,
}

/// The axis-ordered path from `0` to `k`: first along axis 1, then axis 2, and so on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaircasePath {
    pub segments: Vec<Segment>,
}

impl StaircasePath {
    pub fn new(dim: usize, k: &Site) -> StaircasePath {
        let mut at = Site::ORIGIN;
        let mut segments = Vec::new();
        for axis in 0..dim {
            if k.0[axis] != 0 {
                let mut to = at;
                to.0[axis] = k.0[axis];
                segments.push(Segment { axis, from: at, to });
                at = to;
            }
        }
        StaircasePath { segments }
    }

    pub fn len(&self) -> i64 {
        self.segments.iter().map(|s| (s.to.0[s.axis] - s.from.0[s.axis]).abs()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Lower endpoints `z` of the unit edges `[z, z + e^i]` covered by `x + path`.
    pub fn unit_edges(&self, x: &Site) -> Vec<(Site, usize)> {
        let mut out = Vec::new();
        for s in &self.segments {
            let (a, b) = (s.from.0[s.axis], s.to.0[s.axis]);
            for c in a.min(b)..a.max(b) {
                let mut z = *x + s.from;
                z.0[s.axis] = x.0[s.axis] + c;
                out.push((z, s.axis));
            }
        }
        out
    }
}

fn sgn(v: i64) -> f64 {
    v.signum() as f64
}

/// `(x, k) ∈ L^i_z`, all three points given in units of `1/n`:
/// `(x+k)_l = z_l` for `l < i`, `x_l = z_l` for `l > i`, and `z_i ∈ [x_i ∧ (x+k)_i, x_i ∨ (x+k)_i)`.
pub fn l_membership(dim: usize, x: &Site, k: &Site, z: &Site, i: usize) -> bool {
    let y = *x + *k;
    (0..i).all(|l| y.0[l] == z.0[l])
        && (i + 1..dim).all(|l| x.0[l] == z.0[l])
        && x.0[i].min(y.0[i]) <= z.0[i]
        && z.0[i] < x.0[i].max(y.0[i])
}

/// `Σ_{z,i} 1{(x,k) ∈ L^i_z} (g(z+e^i) − g(z)) sgn(k_i)`, by scanning every `z` in the
/// bounding box of `x` and `x + k`.
pub fn path_sum(dim: usize, g: &dyn Fn(&Site) -> f64, x: &Site, k: &Site) -> f64 {
    let y = *x + *k;
    let mut lo = Site::ORIGIN;
    let mut hi = Site::ORIGIN;
    for a in 0..dim {
        lo.0[a] = x.0[a].min(y.0[a]);
        hi.0[a] = x.0[a].max(y.0[a]);
    }
    let mut s = 0.0;
    for z in box_sites(dim, &lo, &hi) {
        for i in 0..dim {
            if l_membership(dim, x, k, &z, i) {
                s += (g(&(z + Site::unit(i))) - g(&z)) * sgn(k.0[i]);
            }
        }
    }
    s
}

/// `n^{2−d} Σ_{(x,k) ∈ L^i_{x0}, |k| ≤ nR} C(x, x+k) (k_j/n) sgn(k_i)` by brute force over
/// candidate `x` (compare with `n^{1−d} a^n_{ij}(x0)`).
pub fn form_side_sum(model: &ConductanceModel, n: u64, radius: f64, x0: &Site, i: usize, j: usize) -> f64 {
    let d = model.dim();
    let nr = n as f64 * radius;
    let reach = nr.floor() as i64;
    let mut lo = *x0;
    let mut hi = *x0;
    for a in 0..d {
        lo.0[a] -= reach;
        hi.0[a] += reach;
    }
    let offsets = crate::lattice::offsets_within(d, nr);
    let mut s = 0.0;
    for x in box_sites(d, &lo, &hi) {
        for k in &offsets {
            if k.0[i] != 0 && l_membership(d, &x, k, x0, i) {
                s += model.conductance(&x, &(x + *k)) * (k.0[j] as f64 / n as f64) * sgn(k.0[i]);
            }
        }
    }
    (n as f64).powi(2 - d as i32) * s
}
