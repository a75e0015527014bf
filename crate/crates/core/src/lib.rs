//! Simulation and analysis of dissipatively stabilized cat qubits.
//!
//! Rates are angular (rad/µs) inside the numerics and ordinary frequencies
//! (MHz) in [`models::SystemParams`]; times are in µs.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod grid;
pub mod hilbert;
pub mod lindblad;
pub mod models;
pub mod semiclassical;

pub use error::{Error, Result};
