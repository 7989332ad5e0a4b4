use crate::lattice::Site;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("envelope too heavy: tail bound {tail:e} still above tol {tol:e} at radius {radius}")]
    EnvelopeTooHeavy { radius: f64, tail: f64, tol: f64 },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("window of {size} sites exceeds cap {cap}; try a window of at most ~{suggestion} sites")]
    SizeExceeded { size: usize, cap: usize, suggestion: usize },

    #[error("degenerate site {site:?}: nu = {nu:e} is below the floor {floor:e}")]
    DegenerateSite { site: Site, nu: f64, floor: f64 },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("internal consistency failure in {what}: discrepancy {discrepancy:e}")]
    Consistency { what: String, discrepancy: f64 },

    #[error("window too small: leakage {leakage:e} exceeds budget {budget:e}")]
    WindowTooSmall { leakage: f64, budget: f64 },

    #[error("truncation defect {defect:e} exceeds tol {tol:e} (set allow_defect to override)")]
    DefectTooLarge { defect: f64, tol: f64 },

    #[error("point {0:?} lies outside the grid support")]
    Extrapolation(Vec<f64>),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unknown check id: {0}")]
    UnknownCheck(String),

    #[error("refusing to freeze: {0}")]
    Freeze(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("toml parse: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("toml serialize: {0}")]
    TomlSer(#[from] toml::ser::Error),
}
