use super::envelope::Envelope;
use crate::error::{Error, Result};
use crate::lattice::{offsets_within, Site};
use std::collections::HashMap;
use std::f64::consts::PI;

/// Largest truncation radius `vertex_weight` will consider before reporting
/// `EnvelopeTooHeavy`.
pub const DEFAULT_MAX_RADIUS: f64 = 4096.0;
/// Enumerating more offsets than this is refused regardless of radius.
const MAX_OFFSETS: usize = 8_000_000;

#[derive(Clone, Debug)]
pub(crate) enum Kind {
    NearestNeighbor { c: f64 },
    /// Per-class jump lists (both directions), indexed by `x mod period`.
    Periodic { period: Site, classes: Vec<HashMap<Site, f64>>, sorted: Vec<Vec<(Site, f64)>> },
    /// `C(x, y) = scale · (offset + |x − y|)^(−exponent)`.
    Radial { scale: f64, offset: f64, exponent: f64 },
    /// Translation-invariant finite table `C(x, x + z) = w(z)`.
    JumpLaw { map: HashMap<Site, f64>, sorted: Vec<(Site, f64)> },
    /// Nearest-neighbour with `C(x, x ± e_i) = c0 (1 + amp sin(2π m₁ / n))`, `m` the edge midpoint.
    Modulated { c0: f64, amplitude: f64, n: f64 },
    /// Jumps with `|z| > radius` removed.
    Truncated { inner: Box<Kind>, radius: f64 },
}

/// A symmetric conductance function on `Z^d × Z^d`. Immutable once built.
#[derive(Clone, Debug)]
pub struct ConductanceModel {
    dim: usize,
    kind: Kind,
    envelope: Envelope,
    name: String,
}

impl ConductanceModel {
    pub(crate) fn from_kind(dim: usize, kind: Kind, name: impl Into<String>) -> ConductanceModel {
        let envelope = envelope_of(dim, &kind);
        ConductanceModel { dim, kind, envelope, name: name.into() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    pub fn doubling_constant(&self) -> f64 {
        self.envelope.doubling_constant(1024)
    }

    /// Declared bounded range `K` (`None` means unbounded).
    pub fn range(&self) -> Option<f64> {
        self.envelope.support_radius()
    }

    pub fn is_translation_invariant(&self) -> bool {
        kind_translation_invariant(&self.kind)
    }

    /// Periodicity lattice: translation-invariant models report period 1 on every axis.
    pub fn period(&self) -> Option<Site> {
        kind_period(&self.kind, self.dim)
    }

    /// Cache key for per-class computations; `None` if the model is aperiodic.
    pub fn class_of(&self, x: &Site) -> Option<Site> {
        self.period().map(|p| x.rem(&p))
    }

    /// Sorted representatives of every periodicity class.
    pub fn class_representatives(&self) -> Option<Vec<Site>> {
        let p = self.period()?;
        let hi = p - Site([1; 3]);
        Some(crate::lattice::box_sites(self.dim, &Site::ORIGIN, &hi))
    }

    pub fn conductance(&self, x: &Site, y: &Site) -> f64 {
        if x == y {
            return 0.0;
        }
        kind_conductance(&self.kind, x, y)
    }

    /// All `(z, C(x, x+z))` with `0 < |z| ≤ radius` and positive weight, sorted by `z`.
    pub fn jumps(&self, x: &Site, radius: f64) -> Vec<(Site, f64)> {
        let mut v = kind_jumps(&self.kind, self.dim, x, radius);
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// Certified bound on `Σ_{|z| > r} C(x, x + z)`, uniform in `x`.
    pub fn tail_bound(&self, r: f64) -> f64 {
        self.envelope.tail_moment(self.dim, r, 0)
    }

    /// Certified bound on `Σ_{|z| > r} |z|² C(x, x + z)`, uniform in `x`.
    pub fn tail_second_moment(&self, r: f64) -> f64 {
        self.envelope.tail_moment(self.dim, r, 2)
    }

    /// Smallest integer radius `R*` whose certified tail is ≤ `tol`.
    pub fn truncation_radius(&self, tol: f64, max_radius: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::Constraint(format!("tol must be positive, got {tol}")));
        }
        if let Some(sr) = self.range() {
            // finite support: smallest integer R with tail ≤ tol, never beyond the support
            let top = sr.ceil();
            let mut r = 1.0;
            while r < top && self.tail_bound(r) > tol {
                r += 1.0;
            }
            return Ok(r.min(top).max(1.0));
        }
        let mut hi = 1.0;
        while self.tail_bound(hi) > tol {
            hi *= 2.0;
            if hi > max_radius {
                let t = self.tail_bound(max_radius);
                if t > tol {
                    return Err(Error::EnvelopeTooHeavy { radius: max_radius, tail: t, tol });
                }
                hi = max_radius;
                break;
            }
        }
        let mut lo = (hi / 2.0).floor().max(0.0);
        // invariant: tail(hi) ≤ tol, tail(lo) > tol (or lo = 0)
        while hi - lo > 1.0 {
            let mid = ((lo + hi) / 2.0).floor();
            if self.tail_bound(mid) <= tol {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let n_offsets = approx_offset_count(self.dim, hi);
        if n_offsets > MAX_OFFSETS as f64 {
            return Err(Error::EnvelopeTooHeavy { radius: hi, tail: self.tail_bound(hi), tol });
        }
        Ok(hi.max(1.0))
    }

    /// The model with every jump longer than `radius` deleted (the truncated chain `W^λ`).
    pub fn truncated(&self, radius: f64) -> ConductanceModel {
        let kind = Kind::Truncated { inner: Box::new(self.kind.clone()), radius };
        let name = format!("{}|trunc{}", self.name, radius);
        ConductanceModel::from_kind(self.dim, kind, name)
    }
}

fn approx_offset_count(dim: usize, r: f64) -> f64 {
    crate::lattice::unit_ball_volume(dim) * (r + 1.0).powi(dim as i32)
}

/// `ν_x` truncated at the minimal `R*` whose certified tail is ≤ `tol`, together with that tail.
pub fn vertex_weight(model: &ConductanceModel, x: &Site, tol: f64) -> Result<(f64, f64)> {
    let r = model.truncation_radius(tol, DEFAULT_MAX_RADIUS)?;
    let nu = crate::linalg::compensated_sum(model.jumps(x, r).iter().map(|j| j.1));
    Ok((nu, model.tail_bound(r)))
}

fn kind_translation_invariant(k: &Kind) -> bool {
    match k {
        Kind::NearestNeighbor { .. } | Kind::Radial { .. } | Kind::JumpLaw { .. } => true,
        Kind::Periodic { classes, .. } => classes.len() == 1,
        Kind::Modulated { amplitude, .. } => *amplitude == 0.0,
        Kind::Truncated { inner, .. } => kind_translation_invariant(inner),
    }
}

fn kind_period(k: &Kind, dim: usize) -> Option<Site> {
    match k {
        Kind::NearestNeighbor { .. } | Kind::Radial { .. } | Kind::JumpLaw { .. } => Some(Site([1; 3])),
        Kind::Periodic { period, .. } => Some(*period),
        Kind::Modulated { amplitude, n, .. } => {
            if *amplitude == 0.0 {
                Some(Site([1; 3]))
            } else if n.fract() == 0.0 && *n >= 1.0 {
                Some(Site([*n as i64, 1, 1]))
            } else {
                let _ = dim;
                None
            }
        }
        Kind::Truncated { inner, .. } => kind_period(inner, dim),
    }
}

pub(crate) fn class_index(period: &Site, x: &Site) -> usize {
    let r = x.rem(period);
    ((r.0[0] * period.0[1] + r.0[1]) * period.0[2] + r.0[2]) as usize
}

fn modulated_weight(c0: f64, amplitude: f64, n: f64, x: &Site, z: &Site) -> f64 {
    let mid = x.0[0] as f64 + z.0[0] as f64 / 2.0;
    c0 * (1.0 + amplitude * (2.0 * PI * mid / n).sin())
}

fn kind_conductance(k: &Kind, x: &Site, y: &Site) -> f64 {
    let z = *y - *x;
    match k {
        Kind::NearestNeighbor { c } => {
            if z.norm2() == 1 {
                *c
            } else {
                0.0
            }
        }
        Kind::Periodic { period, classes, .. } => {
            classes[class_index(period, x)].get(&z).copied().unwrap_or(0.0)
        }
        Kind::Radial { scale, offset, exponent } => scale * (offset + z.norm()).powf(-exponent),
        Kind::JumpLaw { map, .. } => map.get(&z).copied().unwrap_or(0.0),
        Kind::Modulated { c0, amplitude, n } => {
            if z.norm2() == 1 {
                modulated_weight(*c0, *amplitude, *n, x, &z)
            } else {
                0.0
            }
        }
        Kind::Truncated { inner, radius } => {
            if z.norm() <= *radius {
                kind_conductance(inner, x, y)
            } else {
                0.0
            }
        }
    }
}

fn kind_jumps(k: &Kind, dim: usize, x: &Site, radius: f64) -> Vec<(Site, f64)> {
    match k {
        Kind::NearestNeighbor { c } => {
            if radius < 1.0 {
                return vec![];
            }
            (0..dim).flat_map(|a| [(Site::axis(a, -1), *c), (Site::axis(a, 1), *c)]).collect()
        }
        Kind::Periodic { period, sorted, .. } => sorted[class_index(period, x)]
            .iter()
            .filter(|(z, _)| z.norm() <= radius)
            .copied()
            .collect(),
        Kind::Radial { .. } => offsets_within(dim, radius)
            .into_iter()
            .map(|z| (z, kind_conductance(k, &Site::ORIGIN, &z)))
            .filter(|j| j.1 > 0.0)
            .collect(),
        Kind::JumpLaw { sorted, .. } => sorted.iter().filter(|(z, _)| z.norm() <= radius).copied().collect(),
        Kind::Modulated { c0, amplitude, n } => {
            if radius < 1.0 {
                return vec![];
            }
            (0..dim)
                .flat_map(|a| [Site::axis(a, -1), Site::axis(a, 1)])
                .map(|z| (z, modulated_weight(*c0, *amplitude, *n, x, &z)))
                .filter(|j| j.1 > 0.0)
                .collect()
        }
        Kind::Truncated { inner, radius: tr } => kind_jumps(inner, dim, x, radius.min(*tr)),
    }
}

fn envelope_of(dim: usize, k: &Kind) -> Envelope {
    match k {
        Kind::NearestNeighbor { c } => Envelope::step_from([(1.0, *c)]),
        Kind::Periodic { sorted, .. } => {
            Envelope::step_from(sorted.iter().flatten().map(|(z, w)| (z.norm(), *w)))
        }
        Kind::Radial { scale, offset, exponent } => {
            Envelope::PowerLaw { scale: *scale, offset: *offset, exponent: *exponent }
        }
        Kind::JumpLaw { sorted, .. } => Envelope::step_from(sorted.iter().map(|(z, w)| (z.norm(), *w))),
        Kind::Modulated { c0, amplitude, .. } => Envelope::step_from([(1.0, c0 * (1.0 + amplitude.abs()))]),
        Kind::Truncated { inner, radius } => match envelope_of(dim, inner) {
            Envelope::Step(v) => Envelope::Step(v.into_iter().filter(|e| e.0 <= *radius).collect()),
            Envelope::PowerLaw { .. } => {
                // enumerate the (finite) truncated support
                let zs = offsets_within(dim, *radius);
                Envelope::step_from(zs.iter().map(|z| (z.norm(), kind_conductance(inner, &Site::ORIGIN, z))))
            }
        },
    }
}
