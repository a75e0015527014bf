//! Closed-form ATS circuit relations.
//!
//! Energies are E/h in GHz, phases are dimensionless, and returned couplings
//! and shifts are ordinary frequencies in MHz.

use num_complex::Complex64 as C64;

use super::params::{CircuitParams, SystemParams};
use super::units::to_angular;

const GHZ_IN_MHZ: f64 = 1e3;

/// Which resonator a per-mode formula refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CircuitMode {
    /// cat-qubit resonator
    A,
    /// buffer
    B,
}

impl CircuitParams {
    fn phi(&self, mode: CircuitMode) -> f64 {
        match mode {
            CircuitMode::A => self.phi_a,
            CircuitMode::B => self.phi_b,
        }
    }
}

/// ATS potential energy (GHz) at phase `phi` with flux biases φ_Σ, φ_Δ.
///
/// With `use_array` the shunt ½E_Lb φ² is replaced by the five-junction array
/// 5E_JL(1 − cos(φ/5)). The constant offset makes both forms vanish at φ = 0
/// and agree to second order when E_JL = 5E_Lb.
pub fn ats_potential(phi: f64, phi_sigma: f64, phi_delta: f64, c: &CircuitParams, use_array: bool) -> f64 {
    let shunt = if use_array {
        5.0 * c.e_jl * (1.0 - (phi / 5.0).cos())
    } else {
        0.5 * c.e_lb * phi * phi
    };
    shunt - 2.0 * c.e_j * phi_sigma.cos() * (phi + phi_delta).cos()
        + 2.0 * c.de_j * phi_sigma.sin() * (phi + phi_delta).sin()
}

/// Steady pump-induced displacement ξ = i(E_J/ħ)ε₀φ / (κ/2 + i(ω₀ − ω_p)).
///
/// `f_mode0` and `f_p` in MHz, `kappa_mode` in MHz (ν-convention).
pub fn displaced_amplitude(mode: CircuitMode, c: &CircuitParams, f_mode0: f64, f_p: f64, kappa_mode: f64) -> C64 {
    let ej = to_angular(c.e_j * GHZ_IN_MHZ);
    let num = C64::new(0.0, ej * c.eps0 * c.phi(mode));
    let den = C64::new(to_angular(kappa_mode) / 2.0, to_angular(f_mode0 - f_p));
    num / den
}

/// g₂ (MHz) from ħg₂ = E_J ε₀ φ_a² φ_b / 2.
pub fn g2_from_circuit(c: &CircuitParams) -> f64 {
    c.e_j * GHZ_IN_MHZ * c.eps0 * c.phi_a * c.phi_a * c.phi_b / 2.0
}

/// AC-Stark shift (MHz) of `mode`: (1/3) E_J φ_m² (Re ξ_b φ_b + Re ξ_a φ_a).
pub fn stark_shift(mode: CircuitMode, c: &CircuitParams, xi_a: C64, xi_b: C64) -> f64 {
    let phi = c.phi(mode);
    c.e_j * GHZ_IN_MHZ * phi * phi * (xi_b.re * c.phi_b + xi_a.re * c.phi_a) / 3.0
}

/// (f_p − (2f_a − f_b), f_d − f_b) in MHz; both vanish when matched.
pub fn frequency_match(p: &SystemParams) -> (f64, f64) {
    (p.f_p - (2.0 * p.f_a - p.f_b), p.f_d - p.f_b)
}
