use super::model::{class_index, ConductanceModel, Kind};
use crate::error::{Error, Result};
use crate::lattice::{check_dim, Site};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

/// Serializable model description, as it appears in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    NearestNeighbor {
        dim: usize,
        #[serde(default = "one")]
        c: f64,
    },
    /// d = 1; `C(k,k+1)` is `r1` for odd `k`, `s1` for even `k`; `C(k,k+2)` likewise with `r2`, `s2`.
    Remark2Periodic { r1: f64, s1: f64, r2: f64, s2: f64 },
    /// General periodic model: each edge is given once, from a class representative.
    Periodic { dim: usize, period: Vec<i64>, edges: Vec<PeriodicEdge> },
    /// `C(x,y) = scale · (offset + |x−y|)^(−exponent)`; exponent defaults to `d + 4`.
    RadialHeavyTail {
        dim: usize,
        #[serde(default)]
        exponent: Option<f64>,
        #[serde(default)]
        offset: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Random walk with nearest-neighbour steps and rare long jumps `±b_n e¹` of mass `a_n` each.
    HarnackCounterexample {
        #[serde(default = "three")]
        dim: usize,
        b: Vec<i64>,
        a: Vec<f64>,
    },
    /// `C(x,y) = w(y−x)` from a finite symmetric table, given inline or as a CSV file
    /// with columns `dx_1..dx_d, weight`.
    IidTable {
        dim: usize,
        #[serde(default)]
        entries: Vec<TableEntry>,
        #[serde(default)]
        csv: Option<String>,
    },
    /// Nearest-neighbour member of a sequence: `C(x, x±e_i) = c0 (1 + amplitude sin(2π m₁/n))`,
    /// `m` the edge midpoint.
    ModulatedNearestNeighbor {
        dim: usize,
        c0: f64,
        amplitude: f64,
        n: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicEdge {
    pub class: Vec<i64>,
    pub offset: Vec<i64>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub offset: Vec<i64>,
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}
fn three() -> usize {
    3
}

pub fn builtin_names() -> &'static [(&'static str, &'static str)] {
    &[
        ("nearest_neighbor", "C(x,y) = c iff |x-y| = 1; params: dim, c"),
        ("remark2_periodic", "d=1 period-2 model with unit and length-2 edges; params: r1, s1, r2, s2"),
        ("periodic", "general periodic conductances; params: dim, period, edges[{class, offset, weight}]"),
        ("radial_heavy_tail", "C(x,y) = scale (offset + |x-y|)^-exponent; params: dim, exponent (d+4), offset, scale"),
        ("harnack_counterexample", "walk with long jumps +-b_n e1 of mass a_n; params: dim (3), b, a"),
        ("iid_table", "C(x,y) = w(y-x) from a symmetric table; params: dim, entries[{offset, weight}] or csv"),
        ("modulated_nearest_neighbor", "c0 (1 + amplitude sin(2 pi m1/n)) on unit edges; params: dim, c0, amplitude, n"),
    ]
}

impl ModelSpec {
    pub fn build(&self) -> Result<ConductanceModel> {
        self.build_in(None)
    }

    /// Build, resolving relative CSV paths against `base`.
    pub fn build_in(&self, base: Option<&Path>) -> Result<ConductanceModel> {
        builtin_model(self, base)
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Remark2Periodic { .. } => 1,
            ModelSpec::NearestNeighbor { dim, .. }
            | ModelSpec::Periodic { dim, .. }
            | ModelSpec::RadialHeavyTail { dim, .. }
            | ModelSpec::HarnackCounterexample { dim, .. }
            | ModelSpec::IidTable { dim, .. }
            | ModelSpec::ModulatedNearestNeighbor { dim, .. } => *dim,
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Constraint(msg.into())
}

fn site_of(dim: usize, v: &[i64], what: &str) -> Result<Site> {
    if v.len() != dim {
        return Err(bad(format!("{what} has {} coordinates, expected {dim}", v.len())));
    }
    Ok(Site::new(v))
}

/// Construct a named conductance family.
pub fn builtin_model(spec: &ModelSpec, base: Option<&Path>) -> Result<ConductanceModel> {
    check_dim(spec.dim())?;
    match spec {
        ModelSpec::NearestNeighbor { dim, c } => {
            if !(*c > 0.0 && c.is_finite()) {
                return Err(bad(format!("nearest_neighbor: c must be positive, got {c}")));
            }
            Ok(ConductanceModel::from_kind(*dim, Kind::NearestNeighbor { c: *c }, format!("nearest_neighbor(d={dim},c={c})")))
        }
        ModelSpec::Remark2Periodic { r1, s1, r2, s2 } => {
            for (n, v) in [("r1", r1), ("s1", s1), ("r2", r2), ("s2", s2)] {
                if !(*v > 0.0 && v.is_finite()) {
                    return Err(bad(format!("remark2_periodic: {n} must be positive, got {v}")));
                }
            }
            let edges = vec![
                PeriodicEdge { class: vec![0], offset: vec![1], weight: *s1 },
                PeriodicEdge { class: vec![0], offset: vec![2], weight: *s2 },
                PeriodicEdge { class: vec![1], offset: vec![1], weight: *r1 },
                PeriodicEdge { class: vec![1], offset: vec![2], weight: *r2 },
            ];
            periodic(1, &[2], &edges, format!("remark2_periodic(r1={r1},s1={s1},r2={r2},s2={s2})"))
        }
        ModelSpec::Periodic { dim, period, edges } => periodic(*dim, period, edges, format!("periodic(d={dim})")),
        ModelSpec::RadialHeavyTail { dim, exponent, offset, scale } => {
            let exponent = exponent.unwrap_or(*dim as f64 + 4.0);
            if !(exponent > *dim as f64 + 2.0) {
                return Err(bad(format!(
                    "radial_heavy_tail: exponent {exponent} must exceed d+2 for a finite second moment"
                )));
            }
            if *offset < 0.0 || !(*scale > 0.0) {
                return Err(bad("radial_heavy_tail: need offset >= 0 and scale > 0"));
            }
            Ok(ConductanceModel::from_kind(
                *dim,
                Kind::Radial { scale: *scale, offset: *offset, exponent },
                format!("radial_heavy_tail(d={dim},exp={exponent},off={offset},scale={scale})"),
            ))
        }
        ModelSpec::HarnackCounterexample { dim, b, a } => counterexample(*dim, b, a),
        ModelSpec::IidTable { dim, entries, csv } => {
            let mut all: Vec<TableEntry> = entries.clone();
            if let Some(p) = csv {
                let path = match base {
                    Some(b) if Path::new(p).is_relative() => b.join(p),
                    _ => Path::new(p).to_path_buf(),
                };
                all.extend(read_jump_csv(&path, *dim)?);
            }
            table_model(*dim, &all)
        }
        ModelSpec::ModulatedNearestNeighbor { dim, c0, amplitude, n } => {
            if !(*c0 > 0.0) || !(amplitude.abs() < 1.0) || *n == 0 {
                return Err(bad("modulated_nearest_neighbor: need c0 > 0, |amplitude| < 1, n >= 1"));
            }
            Ok(ConductanceModel::from_kind(
                *dim,
                Kind::Modulated { c0: *c0, amplitude: *amplitude, n: *n as f64 },
                format!("modulated_nearest_neighbor(d={dim},c0={c0},amp={amplitude},n={n})"),
            ))
        }
    }
}

fn periodic(dim: usize, period: &[i64], edges: &[PeriodicEdge], name: String) -> Result<ConductanceModel> {
    check_dim(dim)?;
    let p = site_of(dim, period, "period")?;
    if period.iter().any(|&q| q < 1) {
        return Err(bad("period entries must be >= 1"));
    }
    let mut full = p;
    for a in dim..3 {
        full.0[a] = 1;
    }
    let n_classes = (full.0[0] * full.0[1] * full.0[2]) as usize;
    let mut classes: Vec<HashMap<Site, f64>> = vec![HashMap::new(); n_classes];
    for e in edges {
        let c = site_of(dim, &e.class, "edge class")?;
        let z = site_of(dim, &e.offset, "edge offset")?;
        if z == Site::ORIGIN {
            return Err(bad("edge offset must be nonzero"));
        }
        if !(e.weight >= 0.0 && e.weight.is_finite()) {
            return Err(bad(format!("edge weight must be finite and >= 0, got {}", e.weight)));
        }
        if e.weight == 0.0 {
            continue;
        }
        // store both directions: x → x+z from class c, and (x+z) → x from class c+z
        *classes[class_index(&full, &c)].entry(z).or_insert(0.0) += e.weight;
        *classes[class_index(&full, &(c + z))].entry(-z).or_insert(0.0) += e.weight;
    }
    let sorted = classes
        .iter()
        .map(|m| {
            let mut v: Vec<(Site, f64)> = m.iter().map(|(k, w)| (*k, *w)).collect();
            v.sort_by(|a, b| a.0.cmp(&b.0));
            v
        })
        .collect();
    Ok(ConductanceModel::from_kind(dim, Kind::Periodic { period: full, classes, sorted }, name))
}

fn table_model(dim: usize, entries: &[TableEntry]) -> Result<ConductanceModel> {
    let mut map: BTreeMap<Site, f64> = BTreeMap::new();
    for e in entries {
        let z = site_of(dim, &e.offset, "table offset")?;
        if z == Site::ORIGIN {
            return Err(bad("iid_table: offset 0 is not a jump"));
        }
        if !(e.weight >= 0.0 && e.weight.is_finite()) {
            return Err(bad(format!("iid_table: weight must be finite and >= 0, got {}", e.weight)));
        }
        *map.entry(z).or_insert(0.0) += e.weight;
    }
    for (z, w) in &map {
        let back = map.get(&-*z).copied().unwrap_or(0.0);
        if back != *w {
            return Err(bad(format!("iid_table: w({:?}) = {w} but w(-z) = {back}; table must be symmetric", z.0)));
        }
    }
    if map.values().all(|w| *w == 0.0) {
        return Err(bad("iid_table: all weights are zero"));
    }
    Ok(jump_law(dim, map, format!("iid_table(d={dim},{} atoms)", entries.len())))
}

fn jump_law(dim: usize, map: BTreeMap<Site, f64>, name: String) -> ConductanceModel {
    let sorted: Vec<(Site, f64)> = map.iter().filter(|e| *e.1 > 0.0).map(|(k, w)| (*k, *w)).collect();
    let map = sorted.iter().copied().collect();
    ConductanceModel::from_kind(dim, Kind::JumpLaw { map, sorted }, name)
}

fn counterexample(dim: usize, b: &[i64], a: &[f64]) -> Result<ConductanceModel> {
    if b.len() != a.len() || b.is_empty() {
        return Err(bad("harnack_counterexample: b and a must be nonempty and of equal length"));
    }
    if a.iter().any(|&x| !(x > 0.0)) {
        return Err(bad("harnack_counterexample: every a_n must be positive"));
    }
    if b[0] < 2 || b.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("harnack_counterexample: b must be strictly increasing with b_1 >= 2"));
    }
    let sum_a: f64 = a.iter().sum();
    if sum_a > 1.0 / 32.0 {
        return Err(bad(format!("harnack_counterexample: sum of a_n = {sum_a} exceeds 1/32")));
    }
    let second: f64 = a.iter().zip(b).map(|(a, b)| a * (*b as f64).powi(2)).sum();
    if !second.is_finite() {
        return Err(bad("harnack_counterexample: sum a_n b_n^2 must be finite"));
    }
    // ±b_n e¹ carry a_n each; the nearest-neighbour steps share what remains so the
    // jump law is a probability distribution.
    let nn = (1.0 - 2.0 * sum_a) / (2 * dim) as f64;
    let mut map = BTreeMap::new();
    for ax in 0..dim {
        map.insert(Site::axis(ax, 1), nn);
        map.insert(Site::axis(ax, -1), nn);
    }
    for (bn, an) in b.iter().zip(a) {
        map.insert(Site::axis(0, *bn), *an);
        map.insert(Site::axis(0, -*bn), *an);
    }
    Ok(jump_law(dim, map, format!("harnack_counterexample(d={dim},b={b:?})")))
}

/// Read a jump table with columns `dx_1..dx_d, weight` (a header row is required).
pub fn read_jump_csv(path: &Path, dim: usize) -> Result<Vec<TableEntry>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != dim + 1 {
            return Err(bad(format!("jump table row has {} fields, expected {}", rec.len(), dim + 1)));
        }
        let offset = (0..dim)
            .map(|i| rec[i].trim().parse::<i64>().map_err(|e| bad(format!("bad offset '{}': {e}", &rec[i]))))
            .collect::<Result<Vec<_>>>()?;
        let weight = rec[dim].trim().parse::<f64>().map_err(|e| bad(format!("bad weight '{}': {e}", &rec[dim])))?;
        out.push(TableEntry { offset, weight });
    }
    Ok(out)
}
