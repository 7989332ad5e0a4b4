//! Conductance families, site weights, and assumption audits.

mod audit;
mod builtin;
mod envelope;
mod model;

pub use audit::{audit_assumptions, AssumptionEntry, AssumptionReport, AuditParams, Verdict, Witness};
pub use builtin::{builtin_model, builtin_names, ModelSpec, PeriodicEdge, TableEntry};
pub use envelope::Envelope;
pub use model::{vertex_weight, ConductanceModel, DEFAULT_MAX_RADIUS};
pub(crate) use model::class_index;
