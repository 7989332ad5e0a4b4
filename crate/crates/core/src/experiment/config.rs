//! Experiment configuration: one TOML file per run.

use crate::conductance::{AuditParams, ModelSpec, Verdict};
use crate::error::{Error, Result};
use crate::exact::{PoincareFamily, WindowPolicy};
use crate::homogenize::ModelSequence;
use crate::lattice::{check_dim, Site};
use crate::window::WindowSpec;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; all cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Freeze file to compare against, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regression: Option<PathBuf>,
    pub experiment: Experiment,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Artifact directory; `out/<name>` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    CheckAssumptions(CheckAssumptions),
    HeatKernel(HeatKernel),
    Identities(Identities),
    Oracles(Oracles),
    Reversal(ReversalSuite),
    Nash(Nash),
    LowerBound(LowerBound),
    ExitProb(ExitProb),
    Levy(Levy),
    Tightness(Tightness),
    Poincare(Poincare),
    TruncatedKernel(TruncatedKernel),
    Harnack(Harnack),
    Counterexample(Counterexample),
    Homogenize(Homogenize),
    Clt(Clt),
}

pub const KINDS: &[(&str, &str)] = &[
    ("check-assumptions", "audit a model against the standing assumptions; writes assumptions.json"),
    ("heat-kernel", "exact heat kernel on a window; writes kernel.csv (and generator.coo)"),
    ("identities", "exact identities: hitting/Green duality, time reversal, resolvent, cell gradient, path sums"),
    ("oracles", "closed forms: Bessel kernel, gambler's ruin, single-site Green function"),
    ("reversal", "time-reversal identity on windows"),
    ("nash", "on-diagonal upper profile sup_x p(t,x,x) t^{d/2}"),
    ("lower-bound", "near-diagonal lower bound, free and killed"),
    ("exit-prob", "exit probabilities P(tau < gamma D^2) across scales"),
    ("levy", "Levy-system identity by Monte Carlo"),
    ("tightness", "big-jump probabilities of the rescaled chain"),
    ("poincare", "weighted Poincare ratios"),
    ("truncated-kernel", "truncated-chain kernel profile and semigroup perturbation"),
    ("harnack", "Harnack constants by exact solves, optionally with the counterexample walk"),
    ("counterexample", "h(0)/h(y) ratios for the long-jump walk"),
    ("homogenize", "a^n and b^n fields and convergence diagnostics"),
    ("clt", "laws of Z^(n) and W^(n) against the Gaussian limit"),
];

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::CheckAssumptions(_) => "check-assumptions",
            Experiment::HeatKernel(_) => "heat-kernel",
            Experiment::Identities(_) => "identities",
            Experiment::Oracles(_) => "oracles",
            Experiment::Reversal(_) => "reversal",
            Experiment::Nash(_) => "nash",
            Experiment::LowerBound(_) => "lower-bound",
            Experiment::ExitProb(_) => "exit-prob",
            Experiment::Levy(_) => "levy",
            Experiment::Tightness(_) => "tightness",
            Experiment::Poincare(_) => "poincare",
            Experiment::TruncatedKernel(_) => "truncated-kernel",
            Experiment::Harnack(_) => "harnack",
            Experiment::Counterexample(_) => "counterexample",
            Experiment::Homogenize(_) => "homogenize",
            Experiment::Clt(_) => "clt",
        }
    }
}

fn tol9() -> f64 {
    1e-9
}
fn tol10() -> f64 {
    1e-10
}
fn tol12() -> f64 {
    1e-12
}
fn three() -> f64 {
    3.0
}
fn default_paths() -> usize {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckAssumptions {
    pub model: ModelSpec,
    pub region: WindowSpec,
    #[serde(default)]
    pub audit: AuditParams,
    /// Expected verdicts; each becomes a check.
    #[serde(default)]
    pub expect: BTreeMap<String, Verdict>,
    /// Expected constants (`"A1.c1" = 2.0`), compared to 1e-9.
    #[serde(default)]
    pub expect_constants: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatKernel {
    pub model: ModelSpec,
    pub window: WindowSpec,
    pub times: Vec<f64>,
    pub sources: Vec<Vec<i64>>,
    #[serde(default)]
    pub killed: bool,
    /// Omit CSV rows below this value.
    #[serde(default)]
    pub floor: f64,
    #[serde(default = "tol12")]
    pub tol: f64,
    /// Also write the killed generator as `generator.coo`.
    #[serde(default)]
    pub export_coo: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Identities {
    #[serde(default = "tol9")]
    pub tol: f64,
    #[serde(default = "tol12")]
    pub strict_tol: f64,
    /// Tail tolerance for truncating the models (the identities hold for the truncated chain).
    #[serde(default = "tol10")]
    pub gen_tol: f64,
    #[serde(default)]
    pub duality: Vec<DualityCase>,
    #[serde(default)]
    pub reversal: Vec<ReversalCase>,
    #[serde(default)]
    pub resolvent: Vec<ResolventCase>,
    #[serde(default)]
    pub cell_gradient: Vec<CellGradientCase>,
    #[serde(default)]
    pub path_sum: Vec<PathSumCase>,
    #[serde(default)]
    pub form_field: Vec<FormFieldCase>,
}

/// `P^x(Y_τ = w)` against `Σ_z G_B(x,z) C(z,w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualityCase {
    pub model: ModelSpec,
    pub window: WindowSpec,
    pub start: Vec<i64>,
    /// Track exit targets within this distance of the window; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReversalCase {
    pub model: ModelSpec,
    pub window: WindowSpec,
    /// The avoided set `C`.
    pub avoid: Vec<Vec<i64>>,
    pub x: Vec<i64>,
    pub y: Vec<i64>,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventCase {
    pub model: ModelSpec,
    pub window: WindowSpec,
    pub scale: f64,
    pub lambdas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellGradientCase {
    pub dim: usize,
    pub n: u64,
    /// Lower corners of the audited cells, in units of `1/n`.
    pub cells: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSumCase {
    pub dim: usize,
    pub x: Vec<i64>,
    pub steps: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormFieldCase {
    pub model: ModelSpec,
    pub n: u64,
    pub radius: f64,
    pub points: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Oracles {
    #[serde(default)]
    pub bessel_times: Vec<f64>,
    #[serde(default = "tol9")]
    pub bessel_tol: f64,
    /// Interval lengths `m` for the gambler's-ruin check on `{1, …, m−1}`.
    #[serde(default)]
    pub ruin_lengths: Vec<i64>,
    #[serde(default = "ruin_tol")]
    pub ruin_tol: f64,
    #[serde(default)]
    pub single_site: Vec<SingleSiteCase>,
}

fn ruin_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleSiteCase {
    pub model: ModelSpec,
    pub site: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReversalSuite {
    #[serde(default = "tol9")]
    pub tol: f64,
    #[serde(default = "tol10")]
    pub gen_tol: f64,
    pub cases: Vec<ReversalCase>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nash {
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub policy: WindowPolicy,
    pub cases: Vec<BoundCase>,
    /// Time at which the d = 1 nearest-neighbour plateau is compared with `1/(2√π)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau_t: Option<f64>,
    #[serde(default = "plateau_tol")]
    pub plateau_tol: f64,
}

fn plateau_tol() -> f64 {
    0.01
}

/// A model with a frozen bound on its statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundCase {
    pub label: String,
    pub model: ModelSpec,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBound {
    pub t_grid: Vec<f64>,
    /// Killing ball radius in units of `√t`.
    pub r_factor: f64,
    #[serde(default)]
    pub policy: WindowPolicy,
    pub cases: Vec<BoundCase>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitProb {
    pub cases: Vec<ExitCase>,
    /// Radius `A D` of the exit ball, in units of `D`.
    pub a: f64,
    pub scales: Vec<f64>,
    /// Quantile of `τ/D²` at the smallest scale used as `γ`.
    #[serde(default = "quarter")]
    pub quantile: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "three")]
    pub sigmas: f64,
    #[serde(default = "tol9")]
    pub tol: f64,
}

fn quarter() -> f64 {
    0.25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitCase {
    pub label: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub start: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Levy {
    pub model: ModelSpec,
    #[serde(default)]
    pub start: Vec<i64>,
    pub functions: Vec<LevyFunction>,
    pub stops: Vec<LevyStopSpec>,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "three")]
    pub sigmas: f64,
    #[serde(default = "tol9")]
    pub tol: f64,
}

/// `f(x,y) = 1{|x − start| < marked_radius} h(y − x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyFunction {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marked_radius: Option<f64>,
    /// `long_jumps` (`1{|z| ≥ param}`) or `capped_length` (`min(|z|, param)`).
    pub weight: String,
    pub param: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevyStopSpec {
    Fixed { t: f64 },
    /// Exit of `B(start, radius)`, capped at time `cap`.
    ExitBall { radius: f64, cap: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tightness {
    pub model: ModelSpec,
    pub n_grid: Vec<u64>,
    pub eta: f64,
    pub t0: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "three")]
    pub sigmas: f64,
    #[serde(default = "tol9")]
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Poincare {
    pub dims: Vec<usize>,
    pub scales: Vec<f64>,
    /// Sum cut-off in units of `D`.
    pub extent: f64,
    #[serde(default = "adversarial")]
    pub families: Vec<PoincareFamily>,
    pub bound: f64,
}

fn adversarial() -> Vec<PoincareFamily> {
    PoincareFamily::ADVERSARIAL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncatedKernel {
    pub cases: Vec<BoundCase>,
    pub lambdas: Vec<f64>,
    pub scale: f64,
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub policy: WindowPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub model: ModelSpec,
    pub lambda: f64,
    pub scale: f64,
    pub times: Vec<f64>,
    pub half_width: i64,
    pub max_fit_error: f64,
    #[serde(default = "tol9")]
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harnack {
    pub model: ModelSpec,
    #[serde(default)]
    pub center: Vec<i64>,
    pub radii: Vec<f64>,
    /// Point masses on exterior sites within `shell` of the ball.
    pub shell: f64,
    /// Core radius as a fraction of `R`.
    #[serde(default = "half")]
    pub theta: f64,
    pub bound: f64,
    #[serde(default = "tol9")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counterexample {
    pub b: Vec<i64>,
    pub a: Vec<f64>,
    /// Indices into `b` whose ratios are compared, in increasing order.
    pub scales: Vec<usize>,
    #[serde(default = "quarter")]
    pub delta: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "two")]
    pub min_growth: f64,
}

fn two() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Homogenize {
    pub cases: Vec<FieldCase>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldCase {
    pub label: String,
    pub family: ModelSequence,
    pub n_grid: Vec<u64>,
    pub radius: f64,
    pub extent: f64,
    /// Expected `a^n` everywhere, row-major `d × d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    /// Expected `b^n` everywhere, row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    /// d = 1: expected `b^n` at odd and even lattice sites.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_by_parity: Option<[f64; 2]>,
    #[serde(default = "tol12")]
    pub tol: f64,
    /// Limit matrix for the diagnostics, row-major; the closed form when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<Vec<f64>>,
    /// Expected diagnostic verdicts (`A5 = "holds"`).
    #[serde(default)]
    pub verdicts: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clt {
    pub cases: Vec<CltCase>,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "three")]
    pub sigmas: f64,
    pub ks_max: f64,
    #[serde(default = "tol9")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doob: Option<DoobSpec>,
    /// Log this many paths of `Z^(n)` at the first case's first `n` to `paths.csv`.
    #[serde(default)]
    pub log_paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltCase {
    pub label: String,
    pub family: ModelSequence,
    pub n_grid: Vec<u64>,
    pub t: f64,
    /// Limit matrix `a`, row-major.
    pub limit: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_bar: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoobSpec {
    pub n: u64,
    pub t0: f64,
    pub eta: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("out").join(&self.name))
    }

    /// Structural validation: models build, windows fit their models, grids are sane.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config("name must be a non-empty plain identifier".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        super::runners::validate(&self.experiment)
    }
}

pub(crate) fn site(dim: usize, v: &[i64], what: &str) -> Result<Site> {
    check_dim(dim)?;
    if v.is_empty() {
        return Ok(Site::ORIGIN);
    }
    if v.len() != dim {
        return Err(Error::Config(format!("{what} {v:?} does not have dimension {dim}")));
    }
    Ok(Site::new(v))
}

pub(crate) fn positive(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() || v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::Config(format!("{what} must be a non-empty list of positive numbers")));
    }
    Ok(())
}
