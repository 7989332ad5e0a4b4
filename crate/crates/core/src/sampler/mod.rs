//! Monte Carlo engines for `X`, `Y`, `Y^ν`, `Z^(n)` and `W^(n)`.

mod checks;
mod jumps;
mod walk;

pub use checks::*;
pub use jumps::JumpSampler;
pub use walk::{simulate, stream, Clock, Event, PathEnd, PathEnsemble, ProcessKind, SimulateOptions, StopRule, walk};
