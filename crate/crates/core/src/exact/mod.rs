mod checks;
mod green;
mod kernel;
mod poincare;
mod uniformization;

pub use checks::*;
pub use green::*;
pub use kernel::*;
pub use poincare::*;
pub use uniformization::*;
