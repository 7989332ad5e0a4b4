use crate::conductance::{ConductanceModel, DEFAULT_MAX_RADIUS};
use crate::error::{Error, Result};
use crate::lattice::Site;
use rand::Rng;
use rand_distr::{Distribution, WeightedAliasIndex};

struct ClassLaw {
    nu: f64,
    jumps: Vec<Site>,
    weights: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

/// Per-class alias tables over the jump law `C(x, x+z)/ν_x`, `|z| ≤ R*`.
///
/// Jumps beyond `R*` are deleted from the chain (not redistributed); their total rate is
/// bounded by `defect`.
pub struct JumpSampler {
    dim: usize,
    period: Site,
    classes: Vec<ClassLaw>,
    r_star: f64,
    defect: f64,
}

impl JumpSampler {
    /// Truncation radius chosen so that the deleted rate is at most `tol`.
    pub fn new(model: &ConductanceModel, tol: f64) -> Result<JumpSampler> {
        let r = model.truncation_radius(tol, DEFAULT_MAX_RADIUS)?;
        Self::with_radius(model, r)
    }

    pub fn with_radius(model: &ConductanceModel, radius: f64) -> Result<JumpSampler> {
        let period = model
            .period()
            .ok_or_else(|| Error::Constraint(format!("model {} has no periodicity lattice; cannot tabulate jump laws", model.name())))?;
        let reps = model.class_representatives().unwrap_or_default();
        let mut classes = Vec::with_capacity(reps.len());
        for x in &reps {
            let j = model.jumps(x, radius);
            if j.is_empty() {
                return Err(Error::DegenerateSite { site: *x, nu: 0.0, floor: 0.0 });
            }
            let nu = crate::linalg::compensated_sum(j.iter().map(|e| e.1));
            let weights: Vec<f64> = j.iter().map(|e| e.1).collect();
            let alias = WeightedAliasIndex::new(weights.clone()).map_err(|e| Error::Assembly(format!("alias table: {e}")))?;
            classes.push(ClassLaw { nu, jumps: j.into_iter().map(|e| e.0).collect(), weights, alias });
        }
        Ok(JumpSampler { dim: model.dim(), period, classes, r_star: radius, defect: model.tail_bound(radius) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r_star(&self) -> f64 {
        self.r_star
    }

    /// Certified bound on the deleted jump rate per site.
    pub fn defect(&self) -> f64 {
        self.defect
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    #[inline]
    fn class(&self, x: &Site) -> &ClassLaw {
        &self.classes[crate::conductance::class_index(&self.period, x)]
    }

    /// Truncated `ν_x`.
    #[inline]
    pub fn nu(&self, x: &Site) -> f64 {
        self.class(x).nu
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, x: &Site, rng: &mut R) -> Site {
        let c = self.class(x);
        c.jumps[c.alias.sample(rng)]
    }

    /// `(z, C(x, x+z))` for the class of `x`.
    pub fn law(&self, x: &Site) -> impl Iterator<Item = (Site, f64)> + '_ {
        let c = self.class(x);
        c.jumps.iter().copied().zip(c.weights.iter().copied())
    }

    /// Index of the class of `x`, for tables built by [`JumpSampler::class_rates`].
    #[inline]
    pub fn class_id(&self, x: &Site) -> usize {
        crate::conductance::class_index(&self.period, x)
    }

    /// `Σ_z h(z) C(x, x+z)` for each class.
    pub fn class_rates(&self, h: impl Fn(&Site) -> f64) -> Vec<f64> {
        self.classes
            .iter()
            .map(|c| crate::linalg::compensated_sum(c.jumps.iter().zip(&c.weights).map(|(z, w)| h(z) * w)))
            .collect()
    }

    /// `sup_x Σ_z h(z) C(x, x+z)` over classes.
    pub fn sup_rate(&self, h: impl Fn(&Site) -> f64) -> f64 {
        self.class_rates(h).into_iter().fold(0.0, f64::max)
    }
}
