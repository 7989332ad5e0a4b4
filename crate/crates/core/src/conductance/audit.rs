use super::model::{vertex_weight, ConductanceModel};
use crate::lattice::{offsets_within, Site};
use crate::window::LatticeWindow;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, HashSet, VecDeque};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub description: String,
    pub sites: Vec<Vec<i64>>,
    pub values: Vec<Value>,
}

/// One audited assumption. Field names are part of the JSON interface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionEntry {
    pub assumption: String,
    pub verdict: Verdict,
    pub constants: BTreeMap<String, Value>,
    pub witnesses: Vec<Witness>,
    pub region: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssumptionReport {
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn get(&self, assumption: &str) -> Option<&AssumptionEntry> {
        self.entries.iter().find(|e| e.assumption == assumption)
    }

    pub fn constant(&self, assumption: &str, key: &str) -> Option<f64> {
        self.get(assumption)?.constants.get(key).and_then(value_f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditParams {
    /// Largest `M₀` tried by the (A2) search.
    pub m0_cap: usize,
    /// Edge-weight threshold `δ` for (A2) chains.
    pub delta: f64,
    /// Shells up to this radius are scanned for (A3) domination and (A4).
    pub radius: f64,
    /// At most this many `y` per audited `x` in the (A4) scan (deterministic stride sampling).
    pub a4_max_targets: usize,
    /// Audit (A3)/(A4) at no more than this many sites of the region.
    pub max_sites: usize,
    /// Tail tolerance for `ν_x` and the second moment.
    pub tol: f64,
    /// `ν_x` below this floor fails (A1).
    pub nu_floor: f64,
}

impl Default for AuditParams {
    fn default() -> Self {
        AuditParams {
            m0_cap: 6,
            delta: 1e-3,
            radius: 20.0,
            a4_max_targets: 4000,
            max_sites: 16,
            tol: 1e-9,
            nu_floor: 1e-12,
        }
    }
}

pub(crate) fn num(x: f64) -> Value {
    if x.is_finite() {
        serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
    } else if x > 0.0 {
        Value::String("inf".into())
    } else if x < 0.0 {
        Value::String("-inf".into())
    } else {
        Value::String("nan".into())
    }
}

pub(crate) fn value_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) if s == "inf" => Some(f64::INFINITY),
        Value::String(s) if s == "-inf" => Some(f64::NEG_INFINITY),
        _ => None,
    }
}

fn coords(s: &Site, dim: usize) -> Vec<i64> {
    s.coords(dim).to_vec()
}

/// Sites at which per-site checks run: one per periodicity class found in the region,
/// otherwise an evenly strided subset.
fn audit_sites(model: &ConductanceModel, region: &LatticeWindow, cap: usize) -> Vec<Site> {
    let sites = region.sites();
    if let Some(_p) = model.period() {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for s in sites {
            if seen.insert(model.class_of(s)) {
                out.push(*s);
            }
            if out.len() >= cap {
                break;
            }
        }
        return out;
    }
    let stride = sites.len().div_ceil(cap.max(1)).max(1);
    sites.iter().step_by(stride).copied().collect()
}

pub fn audit_assumptions(model: &ConductanceModel, region: &LatticeWindow, params: &AuditParams) -> AssumptionReport {
    let region_desc = region.describe();
    let sites = audit_sites(model, region, params.max_sites);
    let mut entries = vec![
        audit_a1(model, region, params),
        audit_a2(model, region, params),
        audit_a3(model, &sites, params),
        audit_a4(model, &sites, params),
        audit_symmetry(model, &sites, params),
    ];
    for e in &mut entries {
        e.region = format!("{region_desc}; shells to radius {}", params.radius);
    }
    AssumptionReport { entries }
}

fn entry(name: &str) -> AssumptionEntry {
    AssumptionEntry {
        assumption: name.into(),
        verdict: Verdict::Pass,
        constants: BTreeMap::new(),
        witnesses: vec![],
        region: String::new(),
    }
}

fn audit_a1(model: &ConductanceModel, region: &LatticeWindow, p: &AuditParams) -> AssumptionEntry {
    let mut e = entry("A1");
    let dim = model.dim();
    let mut lo = (f64::INFINITY, Site::ORIGIN);
    let mut hi = (f64::NEG_INFINITY, Site::ORIGIN);
    let mut cache: BTreeMap<Site, f64> = BTreeMap::new();
    for s in region.sites() {
        let nu = match model.class_of(s) {
            Some(c) => match cache.get(&c) {
                Some(v) => *v,
                None => match vertex_weight(model, s, p.tol) {
                    Ok((nu, _)) => {
                        cache.insert(c, nu);
                        nu
                    }
                    Err(err) => {
                        e.verdict = Verdict::Inconclusive;
                        e.witnesses.push(Witness { description: err.to_string(), sites: vec![coords(s, dim)], values: vec![] });
                        return e;
                    }
                },
            },
            None => match vertex_weight(model, s, p.tol) {
                Ok((nu, _)) => nu,
                Err(err) => {
                    e.verdict = Verdict::Inconclusive;
                    e.witnesses.push(Witness { description: err.to_string(), sites: vec![coords(s, dim)], values: vec![] });
                    return e;
                }
            },
        };
        if nu < lo.0 {
            lo = (nu, *s);
        }
        if nu > hi.0 {
            hi = (nu, *s);
        }
    }
    e.constants.insert("c1".into(), num(lo.0));
    e.constants.insert("c2".into(), num(hi.0));
    if !(lo.0 >= p.nu_floor) {
        e.verdict = Verdict::Fail;
        e.witnesses.push(Witness {
            description: "nu_x below floor".into(),
            sites: vec![coords(&lo.1, dim)],
            values: vec![num(lo.0)],
        });
    }
    e
}

/// Breadth-first search from `x` to `y` inside the closed ball of radius `m0` around `x`,
/// using edges of weight ≥ δ. Returns the number of points on a shortest chain.
fn chain_length(model: &ConductanceModel, x: &Site, y: &Site, m0: f64, delta: f64) -> Option<usize> {
    let inside = |s: &Site| ((*s - *x).norm2() as f64) <= m0 * m0;
    if !inside(y) {
        return None;
    }
    let mut dist: std::collections::HashMap<Site, usize> = std::collections::HashMap::new();
    let mut q = VecDeque::new();
    dist.insert(*x, 1);
    q.push_back(*x);
    while let Some(u) = q.pop_front() {
        let du = dist[&u];
        if u == *y {
            return Some(du);
        }
        for (z, w) in model.jumps(&u, 2.0 * m0) {
            if w < delta {
                continue;
            }
            let v = u + z;
            if inside(&v) && !dist.contains_key(&v) {
                dist.insert(v, du + 1);
                q.push_back(v);
            }
        }
    }
    None
}

fn audit_a2(model: &ConductanceModel, region: &LatticeWindow, p: &AuditParams) -> AssumptionEntry {
    let mut e = entry("A2");
    let dim = model.dim();
    // unit-neighbour pairs, deduplicated by periodicity class when available
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for x in region.sites() {
        for ax in 0..dim {
            let y = *x + Site::unit(ax);
            if region.index_of(&y).is_none() {
                continue;
            }
            let key = (model.class_of(x).unwrap_or(*x), ax, model.class_of(x).is_some());
            if seen.insert(key) {
                pairs.push((*x, y));
            }
        }
    }
    e.constants.insert("delta".into(), num(p.delta));
    e.constants.insert("pairs_checked".into(), num(pairs.len() as f64));
    if pairs.is_empty() {
        e.verdict = Verdict::Inconclusive;
        return e;
    }
    for m0 in 1..=p.m0_cap {
        let mut worst = 0usize;
        let mut failed = None;
        for (x, y) in &pairs {
            match chain_length(model, x, y, m0 as f64, p.delta) {
                Some(n) => worst = worst.max(n),
                None => {
                    failed = Some((*x, *y));
                    break;
                }
            }
        }
        match failed {
            None => {
                e.constants.insert("M0".into(), num(m0 as f64));
                e.constants.insert("N".into(), num(worst as f64));
                return e;
            }
            Some((x, y)) if m0 == p.m0_cap => {
                e.verdict = Verdict::Inconclusive;
                e.witnesses.push(Witness {
                    description: format!("no chain with edges >= delta inside the closed ball of radius {m0}"),
                    sites: vec![coords(&x, dim), coords(&y, dim)],
                    values: vec![],
                });
            }
            _ => {}
        }
    }
    e
}

fn audit_a3(model: &ConductanceModel, sites: &[Site], p: &AuditParams) -> AssumptionEntry {
    let mut e = entry("A3");
    let dim = model.dim();
    let env = model.envelope();
    let r_star = match model.truncation_radius(p.tol, super::model::DEFAULT_MAX_RADIUS) {
        Ok(r) => r,
        Err(err) => {
            e.verdict = Verdict::Fail;
            e.witnesses.push(Witness { description: err.to_string(), sites: vec![], values: vec![] });
            return e;
        }
    };
    let scan = r_star.min(p.radius.max(1.0));
    let mut c0 = 0.0f64;
    for x in sites {
        let mut m2 = 0.0;
        for (z, w) in model.jumps(x, r_star) {
            m2 += z.norm2() as f64 * w;
            if z.norm() <= scan && w > env.value(z.norm()) * (1.0 + 1e-12) {
                e.verdict = Verdict::Fail;
                if e.witnesses.len() < 8 {
                    e.witnesses.push(Witness {
                        description: "C(x,y) exceeds phi(|x-y|)".into(),
                        sites: vec![coords(x, dim), coords(&(*x + z), dim)],
                        values: vec![num(w), num(env.value(z.norm()))],
                    });
                }
            }
        }
        c0 = c0.max(m2);
    }
    let tail2 = model.tail_second_moment(r_star);
    c0 += tail2;
    let imax = 2048;
    let (half, full) = env.summability(dim, imax);
    e.constants.insert("C0".into(), num(c0));
    e.constants.insert("R_star".into(), num(r_star));
    e.constants.insert("moment_sum".into(), num(full));
    e.constants.insert("doubling".into(), num(model.doubling_constant()));
    if !c0.is_finite() {
        e.verdict = Verdict::Fail;
        e.witnesses.push(Witness { description: "second moment not finite".into(), sites: vec![], values: vec![num(c0)] });
    }
    if !(full.is_finite() && full - half <= 1e-2 * full.max(1e-300)) {
        e.verdict = Verdict::Fail;
        e.witnesses.push(Witness {
            description: format!("partial sums of i^(d+1) phi(i) not settled at {imax}"),
            sites: vec![],
            values: vec![num(half), num(full)],
        });
    }
    e
}

fn audit_a4(model: &ConductanceModel, sites: &[Site], p: &AuditParams) -> AssumptionEntry {
    let mut e = entry("A4");
    let dim = model.dim();
    let mut sup = 1.0f64;
    let mut per_length: BTreeMap<i64, usize> = BTreeMap::new();
    for x in sites {
        let targets = model.jumps(x, p.radius);
        let stride = targets.len().div_ceil(p.a4_max_targets.max(1)).max(1);
        for (z, w) in targets.iter().step_by(stride) {
            let rad = z.norm() / 3.0;
            let y = *x + *z;
            for dz in std::iter::once(Site::ORIGIN).chain(offsets_within(dim, rad)) {
                let yp = y + dz;
                let wp = model.conductance(x, &yp);
                let ratio = if wp > 0.0 { w / wp } else { f64::INFINITY };
                if ratio > sup {
                    sup = ratio;
                }
                if !ratio.is_finite() {
                    let cnt = per_length.entry(z.norm2()).or_insert(0);
                    if *cnt < 2 && e.witnesses.len() < 32 {
                        *cnt += 1;
                        e.witnesses.push(Witness {
                            description: "C(x,y) > 0 but C(x,y') = 0 with |y-y'| <= |x-y|/3".into(),
                            sites: vec![coords(x, dim), coords(&y, dim), coords(&yp, dim)],
                            values: vec![num(*w), num(wp)],
                        });
                    }
                }
            }
        }
    }
    e.constants.insert("comparison".into(), num(sup));
    if !sup.is_finite() {
        e.verdict = Verdict::Fail;
    }
    e
}

fn audit_symmetry(model: &ConductanceModel, sites: &[Site], p: &AuditParams) -> AssumptionEntry {
    let mut e = entry("symmetry");
    let dim = model.dim();
    for x in sites {
        for (z, w) in model.jumps(x, p.radius) {
            let y = *x + z;
            let back = model.conductance(&y, x);
            if back != w {
                e.verdict = Verdict::Fail;
                if e.witnesses.len() < 8 {
                    e.witnesses.push(Witness {
                        description: "C(x,y) != C(y,x)".into(),
                        sites: vec![coords(x, dim), coords(&y, dim)],
                        values: vec![num(w), num(back)],
                    });
                }
            }
        }
    }
    e
}
