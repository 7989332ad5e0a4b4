//! Effective coefficients `a^n`, `b^n` and the machinery that ties them to the forms.
//!
//! Points of `n^{-1}Z^d` are stored as integer sites `X = n x`.

mod clt;
mod diagnostics;
mod extension;
mod field;
mod staircase;

pub use clt::*;
pub use diagnostics::*;
pub use extension::*;
pub use field::*;
pub use staircase::*;
