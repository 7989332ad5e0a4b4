//! Finite computational windows with a bijective site ↔ index map.

use crate::error::{Error, Result};
use crate::lattice::{ball_sites, box_sites, check_dim, Site};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// What happens to mass that jumps out of the window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum ExteriorPolicy {
    /// Kill on exit.
    #[default]
    Absorb,
    /// Keep per-target exit rates for exterior sites within `radius` of the window
    /// (all reachable ones if `None`); aggregate the rest.
    TrackTargets { radius: Option<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum WindowShape {
    Box { lo: Site, hi: Site },
    Ball { center: Site, radius: f64 },
    Sites,
}

/// Window description used by configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum WindowSpec {
    Box { lo: Vec<i64>, hi: Vec<i64> },
    Ball { center: Vec<i64>, radius: f64 },
}

impl WindowSpec {
    pub fn build(&self, dim: usize) -> Result<LatticeWindow> {
        let site = |v: &Vec<i64>| -> Result<Site> {
            if v.len() != dim {
                return Err(Error::Config(format!("window coordinate {v:?} does not have dimension {dim}")));
            }
            Ok(Site::new(v))
        };
        match self {
            WindowSpec::Box { lo, hi } => LatticeWindow::new_box(dim, site(lo)?, site(hi)?),
            WindowSpec::Ball { center, radius } => LatticeWindow::ball(dim, site(center)?, *radius),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LatticeWindow {
    dim: usize,
    shape: WindowShape,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
    policy: ExteriorPolicy,
}

impl LatticeWindow {
    pub fn new_box(dim: usize, lo: Site, hi: Site) -> Result<LatticeWindow> {
        check_dim(dim)?;
        let sites = box_sites(dim, &lo, &hi);
        if sites.is_empty() {
            return Err(Error::Constraint(format!("empty box {:?}..{:?}", lo.0, hi.0)));
        }
        Ok(Self::from_parts(dim, WindowShape::Box { lo, hi }, sites))
    }

    /// Box `[-half, half]^d` around `center`.
    pub fn cube(dim: usize, center: Site, half: i64) -> Result<LatticeWindow> {
        let h = Site::new(&vec![half; dim]);
        Self::new_box(dim, center - h, center + h)
    }

    /// `B(center, radius) = { y : |y − center| < radius }`.
    pub fn ball(dim: usize, center: Site, radius: f64) -> Result<LatticeWindow> {
        check_dim(dim)?;
        let sites = ball_sites(dim, &center, radius);
        if sites.is_empty() {
            return Err(Error::Constraint(format!("ball of radius {radius} is empty")));
        }
        Ok(Self::from_parts(dim, WindowShape::Ball { center, radius }, sites))
    }

    pub fn from_sites(dim: usize, mut sites: Vec<Site>) -> Result<LatticeWindow> {
        check_dim(dim)?;
        sites.sort();
        sites.dedup();
        if sites.is_empty() {
            return Err(Error::Constraint("empty site set".into()));
        }
        Ok(Self::from_parts(dim, WindowShape::Sites, sites))
    }

    fn from_parts(dim: usize, shape: WindowShape, sites: Vec<Site>) -> LatticeWindow {
        let index = sites.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        LatticeWindow { dim, shape, sites, index, policy: ExteriorPolicy::Absorb }
    }

    pub fn with_policy(mut self, policy: ExteriorPolicy) -> LatticeWindow {
        self.policy = policy;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.sites.len()
    }
    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }
    pub fn site(&self, i: usize) -> Site {
        self.sites[i]
    }
    pub fn shape(&self) -> &WindowShape {
        &self.shape
    }
    pub fn policy(&self) -> ExteriorPolicy {
        self.policy
    }

    #[inline]
    pub fn index_of(&self, s: &Site) -> Option<usize> {
        if let WindowShape::Box { lo, hi } = &self.shape {
            let mut idx = 0i64;
            for a in 0..self.dim {
                let c = s.0[a];
                if c < lo.0[a] || c > hi.0[a] {
                    return None;
                }
                idx = idx * (hi.0[a] - lo.0[a] + 1) + (c - lo.0[a]);
            }
            if s.0[self.dim..].iter().any(|&c| c != 0) {
                return None;
            }
            return Some(idx as usize);
        }
        self.index.get(s).copied()
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.index_of(s).is_some()
    }

    /// Inclusive bounding box of the window.
    pub fn bounding_box(&self) -> (Site, Site) {
        match &self.shape {
            WindowShape::Box { lo, hi } => (*lo, *hi),
            _ => {
                let mut lo = self.sites[0];
                let mut hi = self.sites[0];
                for s in &self.sites {
                    for a in 0..self.dim {
                        lo.0[a] = lo.0[a].min(s.0[a]);
                        hi.0[a] = hi.0[a].max(s.0[a]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Euclidean distance from `y` to the window's hull (box or continuous ball); an
    /// over-approximation is never produced.
    pub fn distance_to(&self, y: &Site) -> f64 {
        match &self.shape {
            WindowShape::Box { lo, hi } => {
                let mut d2 = 0.0;
                for a in 0..self.dim {
                    let c = y.0[a];
                    let e = if c < lo.0[a] {
                        lo.0[a] - c
                    } else if c > hi.0[a] {
                        c - hi.0[a]
                    } else {
                        0
                    };
                    d2 += (e * e) as f64;
                }
                d2.sqrt()
            }
            WindowShape::Ball { center, radius } => (y.dist(center) - radius).max(0.0),
            WindowShape::Sites => self.sites.iter().map(|s| s.dist(y)).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn describe(&self) -> String {
        match &self.shape {
            WindowShape::Box { lo, hi } => {
                format!("box {:?}..{:?} ({} sites)", lo.coords(self.dim), hi.coords(self.dim), self.len())
            }
            WindowShape::Ball { center, radius } => {
                format!("ball center {:?} radius {radius} ({} sites)", center.coords(self.dim), self.len())
            }
            WindowShape::Sites => format!("site set ({} sites)", self.len()),
        }
    }
}
