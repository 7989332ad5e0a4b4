//! Symmetric Markov chains on `Z^d` driven by unbounded-range conductances.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`] — sites, balls, and offset enumeration.
//! * [`conductance`] — conductance families, site weights, and assumption audits.
//! * [`window`], [`generator`], [`form`] — finite windows, generator assembly, and
//!   Dirichlet forms at scale `D`.
//! * [`exact`] — uniformization heat kernels, Green functions, hitting distributions,
//!   and the exact identities between them.
//! * [`sampler`] — Monte Carlo engines for the discrete and continuous chains.
//! * [`homogenize`] — the `a^n`/`b^n` matrix fields, staircase paths, and CLT harness.
//! * [`harnack`] — harmonic functions, Harnack constants, and the failure example.
//! * [`experiment`] — TOML-configured experiments, run reports, and freeze files.

pub mod conductance;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod form;
pub mod generator;
pub mod harnack;
pub mod homogenize;
pub mod lattice;
pub mod linalg;
pub mod reference;
pub mod sampler;
pub mod stats;
pub mod window;

pub use conductance::{builtin_model, vertex_weight, ConductanceModel, ModelSpec};
pub use error::{Error, Result};
pub use lattice::{Site, MAX_DIM};
pub use window::{ExteriorPolicy, LatticeWindow};
