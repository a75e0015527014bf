//! The one-, two- and three-mode cat-qubit models, the parameter registry,
//! and closed-form circuit relations.
//!
//! Public inputs use the ν-convention (MHz); the builders convert to rad/µs
//! exactly once via [`units::to_angular`].

mod circuit;
mod params;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{min_truncation, mode_operator, DensityMatrix, Ket, ModeOp, Operator, SpaceSig};

pub use circuit::{ats_potential, displaced_amplitude, frequency_match, g2_from_circuit, stark_shift, CircuitMode};
pub use params::{parse_kv, CircuitParams, SystemParams};

pub mod units {
    use std::f64::consts::PI;

    /// MHz → rad/µs.
    pub fn to_angular(nu: f64) -> f64 {
        2.0 * PI * nu
    }

    /// rad/µs → MHz.
    pub fn to_nu(omega: f64) -> f64 {
        omega / (2.0 * PI)
    }
}

use units::to_angular;

/// κ₂ = 4|g₂|²/κ_b, in whatever convention both inputs share.
pub fn kappa2_effective(g2: f64, kappa_b: f64) -> f64 {
    if !(kappa_b > 0.0) {
        return f64::NAN;
    }
    4.0 * g2 * g2 / kappa_b
}

/// α² = −ε_d / g₂*.
pub fn alpha_from_drive(eps_d: C64, g2: C64) -> Result<C64> {
    if g2.norm() == 0.0 {
        return Err(Error::InvalidParameter("g2 must be nonzero".into()));
    }
    Ok(-eps_d / g2.conj())
}

/// κ_c = 2|α|²κ₂.
pub fn confinement_rate(alpha_sq: f64, kappa2: f64) -> f64 {
    2.0 * alpha_sq.abs() * kappa2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rung {
    OneMode,
    TwoMode,
    ThreeMode,
}

impl Rung {
    pub fn n_modes(self) -> usize {
        match self {
            Rung::OneMode => 1,
            Rung::TwoMode => 2,
            Rung::ThreeMode => 3,
        }
    }
}

impl std::str::FromStr for Rung {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_mode" => Ok(Rung::OneMode),
            "two_mode" => Ok(Rung::TwoMode),
            "three_mode" => Ok(Rung::ThreeMode),
            other => Err(Error::InvalidKind(other.to_string())),
        }
    }
}

/// Smallest buffer truncation accepted: vacuum plus two levels.
pub const MIN_BUFFER_DIM: usize = 3;

/// A model rung with its parameters, drive strength and truncations.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub rung: Rung,
    pub params: SystemParams,
    /// α² = −ε_d/g₂*, real and non-negative.
    pub alpha_sq: f64,
    /// Per-mode dimensions: `[N_a]`, `[N_a, N_b]` or `[N_a, N_b, 2]`.
    pub truncations: Vec<usize>,
    /// Cat-mode detuning Δ (MHz), entering as +Δ a†a.
    pub detuning: f64,
}

impl ModelSpec {
    /// Uses the smallest cat truncation allowed and a three-level buffer.
    pub fn new(rung: Rung, params: SystemParams, alpha_sq: f64) -> Self {
        let n_a = min_truncation(alpha_sq.max(0.0).sqrt());
        let truncations = match rung {
            Rung::OneMode => vec![n_a],
            Rung::TwoMode => vec![n_a, MIN_BUFFER_DIM],
            Rung::ThreeMode => vec![n_a, MIN_BUFFER_DIM, 2],
        };
        Self { rung, params, alpha_sq, truncations, detuning: 0.0 }
    }

    pub fn with_truncations(mut self, dims: Vec<usize>) -> Self {
        self.truncations = dims;
        self
    }

    pub fn with_detuning(mut self, delta: f64) -> Self {
        self.detuning = delta;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_sq.sqrt()
    }

    /// κ₂ in rad/µs.
    pub fn kappa2(&self) -> f64 {
        to_angular(kappa2_effective(self.params.g2, self.params.kappa_b))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.alpha_sq >= 0.0) || !self.alpha_sq.is_finite() {
            return Err(Error::InvalidParameter("alpha_sq must be finite and >= 0".into()));
        }
        if !self.detuning.is_finite() {
            return Err(Error::InvalidParameter("detuning must be finite".into()));
        }
        let want = self.rung.n_modes();
        if self.truncations.len() != want {
            return Err(Error::InvalidParameter(format!(
                "{:?} needs {want} truncations, got {}",
                self.rung,
                self.truncations.len()
            )));
        }
        let need = min_truncation(self.alpha());
        if self.truncations[0] < need {
            return Err(Error::TruncationTooSmall {
                have: self.truncations[0],
                need,
                context: format!("cat mode at alpha^2 = {}", self.alpha_sq),
            });
        }
        if want >= 2 && self.truncations[1] < MIN_BUFFER_DIM {
            return Err(Error::TruncationTooSmall {
                have: self.truncations[1],
                need: MIN_BUFFER_DIM,
                context: "buffer".into(),
            });
        }
        if want == 3 && self.truncations[2] != 2 {
            return Err(Error::InvalidParameter("the transmon is a two-level system".into()));
        }
        Ok(())
    }

    pub fn sig(&self) -> Result<SpaceSig> {
        SpaceSig::new(self.truncations.clone())
    }

    /// (H in rad/µs, loss operators with √rate) for the configured rung.
    pub fn build(&self) -> Result<(Operator, Vec<Operator>)> {
        match self.rung {
            Rung::OneMode => build_one_mode(self),
            Rung::TwoMode => build_two_mode(self),
            Rung::ThreeMode => build_three_mode(self),
        }
    }

    /// `op` on the cat mode of this model's space.
    pub fn cat_op(&self, kind: ModeOp) -> Result<Operator> {
        mode_operator(&self.sig()?, 0, kind)
    }

    /// Lifts a cat-mode ket to the full space, with the buffer in vacuum and
    /// the transmon in its ground (or excited) state.
    pub fn embed_cat_state(&self, cat: &Ket, transmon_excited: bool) -> Result<DensityMatrix> {
        let sig = self.sig()?;
        if cat.sig().dims() != [sig.dims()[0]] {
            return Err(Error::SigMismatch { left: cat.sig().dims().to_vec(), right: vec![sig.dims()[0]] });
        }
        let mut ket = cat.clone();
        if self.rung != Rung::OneMode {
            ket = ket.tensor(&Ket::fock(&SpaceSig::single(sig.dims()[1])?, &[0])?);
        }
        if self.rung == Rung::ThreeMode {
            let level = usize::from(transmon_excited);
            ket = ket.tensor(&Ket::fock(&SpaceSig::single(2)?, &[level])?);
        }
        Ok(ket.to_density())
    }
}

fn require(spec: &ModelSpec, rung: Rung) -> Result<()> {
    if spec.rung != rung {
        return Err(Error::InvalidParameter(format!("spec is {:?}, builder expects {:?}", spec.rung, rung)));
    }
    spec.validate()
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Cat-mode terms shared by every rung: −(χ_aa/2) a†²a² + Δ a†a.
fn cat_hamiltonian(spec: &ModelSpec, sig: &SpaceSig) -> Result<Operator> {
    let a = mode_operator(sig, 0, ModeOp::Annihilation)?;
    let n = mode_operator(sig, 0, ModeOp::Number)?;
    let ad = a.dagger();
    let kerr = &(&ad * &ad) * &(&a * &a);
    let chi = to_angular(spec.params.chi_aa);
    Ok(&kerr.scale(c(-chi / 2.0)) + &n.scale(c(to_angular(spec.detuning))))
}

fn hermitize(op: Operator) -> Result<Operator> {
    let sig = op.sig().clone();
    let sym = (op.data() + &op.dagger().into_data()) * c(0.5);
    Operator::hermitian(sig, sym)
}

/// Buffer eliminated: H = −(χ_aa/2)a†²a², losses √κ_a a and √κ₂(a² − α²).
pub fn build_one_mode(spec: &ModelSpec) -> Result<(Operator, Vec<Operator>)> {
    require(spec, Rung::OneMode)?;
    let sig = spec.sig()?;
    let a = mode_operator(&sig, 0, ModeOp::Annihilation)?;
    let h = hermitize(cat_hamiltonian(spec, &sig)?)?;
    let l2 = (&(&a * &a) - &Operator::identity(&sig).scale(c(spec.alpha_sq))).scale(c(spec.kappa2().sqrt()));
    let la = a.scale(c(to_angular(spec.params.kappa_a).sqrt()));
    Ok((h, vec![la, l2]))
}

/// Buffer kept: H = g₂(a² − α²)b† + h.c. − (χ_aa/2)a†²a², losses √κ_a a, √κ_b b.
fn two_mode_parts(spec: &ModelSpec, sig: &SpaceSig) -> Result<(Operator, Vec<Operator>)> {
    let a = mode_operator(sig, 0, ModeOp::Annihilation)?;
    let b = mode_operator(sig, 1, ModeOp::Annihilation)?;
    let g2 = to_angular(spec.params.g2);
    let pair = &(&a * &a) - &Operator::identity(sig).scale(c(spec.alpha_sq));
    let exchange = (&pair * &b.dagger()).scale(c(g2));
    let h = &(&exchange + &exchange.dagger()) + &cat_hamiltonian(spec, sig)?;
    let la = a.scale(c(to_angular(spec.params.kappa_a).sqrt()));
    let lb = b.scale(c(to_angular(spec.params.kappa_b).sqrt()));
    Ok((h, vec![la, lb]))
}

pub fn build_two_mode(spec: &ModelSpec) -> Result<(Operator, Vec<Operator>)> {
    require(spec, Rung::TwoMode)?;
    let sig = spec.sig()?;
    let (h, losses) = two_mode_parts(spec, &sig)?;
    Ok((hermitize(h)?, losses))
}

/// Adds the transmon: −χ_qa a†a q†q, decay √(κ_q(1+n_th)) q and heating
/// √(κ_q n_th) q† with κ_q = 1/T1_q.
pub fn build_three_mode(spec: &ModelSpec) -> Result<(Operator, Vec<Operator>)> {
    require(spec, Rung::ThreeMode)?;
    let sig = spec.sig()?;
    let (h2, mut losses) = two_mode_parts(spec, &sig)?;
    let na = mode_operator(&sig, 0, ModeOp::Number)?;
    let q = mode_operator(&sig, 2, ModeOp::Annihilation)?;
    let nq = mode_operator(&sig, 2, ModeOp::Number)?;
    let cross = (&na * &nq).scale(c(-to_angular(spec.params.chi_qa)));
    let kappa_q = 1.0 / spec.params.t1_q;
    let n_th = spec.params.n_th;
    losses.push(q.scale(c((kappa_q * (1.0 + n_th)).sqrt())));
    losses.push(q.dagger().scale(c((kappa_q * n_th).sqrt())));
    Ok((hermitize(&h2 + &cross)?, losses))
}
