//! Two-phase KL training with weight decay, per-device evaluation and
//! repeated-run averaging.

mod adam;
mod eval;
mod loss;
mod schedule;
mod trainer;

pub use adam::*;
pub use eval::*;
pub use loss::*;
pub use schedule::*;
pub use trainer::*;
