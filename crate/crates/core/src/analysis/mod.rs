//! Fitting, phase-space maps and the experiment pipelines built on them.

mod fit;
mod pipelines;
mod wigner;

pub use fit::*;
pub use pipelines::*;
pub use wigner::*;
