use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{hermitian_deviation, min_truncation, Operator, SpaceSig};
use crate::error::{Error, Result};

/// State vector on a truncated space.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    sig: SpaceSig,
    amps: Array1<C64>,
}

impl Ket {
    /// Wraps and normalizes `amps`.
    pub fn new(sig: SpaceSig, amps: Array1<C64>) -> Result<Self> {
        if amps.len() != sig.total_dim() {
            return Err(Error::ShapeMismatch { rows: amps.len(), cols: 1, dim: sig.total_dim() });
        }
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("ket has zero or non-finite norm".into()));
        }
        Ok(Self { sig, amps: amps / C64::new(norm, 0.0) })
    }

    /// Wraps `amps` unchanged after checking they are already normalized.
    pub(crate) fn from_normalized(sig: SpaceSig, amps: Array1<C64>) -> Result<Self> {
        if amps.len() != sig.total_dim() {
            return Err(Error::ShapeMismatch { rows: amps.len(), cols: 1, dim: sig.total_dim() });
        }
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() < 1e-10) {
            return Err(Error::InvalidState(format!("ket norm {norm} is not 1")));
        }
        Ok(Self { sig, amps })
    }

    pub fn fock(sig: &SpaceSig, levels: &[usize]) -> Result<Self> {
        let idx = sig.index(levels)?;
        let mut amps = Array1::zeros(sig.total_dim());
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Self { sig: sig.clone(), amps })
    }

    /// Coherent state |α⟩ with analytic Fock amplitudes, renormalized in the
    /// truncated space.
    pub fn coherent(n: usize, alpha: C64) -> Result<Self> {
        let sig = SpaceSig::single(n)?;
        Self::new(sig, coherent_amplitudes(n, alpha))
    }

    pub fn sig(&self) -> &SpaceSig {
        &self.sig
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Ket) -> Result<C64> {
        self.sig.ensure_same(&other.sig)?;
        Ok(self.amps.iter().zip(other.amps.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    /// `self ⊗ other`.
    pub fn tensor(&self, other: &Ket) -> Ket {
        let m = other.amps.len();
        let amps = Array1::from_shape_fn(self.amps.len() * m, |i| self.amps[i / m] * other.amps[i % m]);
        Ket { sig: self.sig.join(&other.sig), amps }
    }

    pub fn to_density(&self) -> DensityMatrix {
        let n = self.amps.len();
        let data = Array2::from_shape_fn((n, n), |(i, j)| self.amps[i] * self.amps[j].conj());
        DensityMatrix { sig: self.sig.clone(), data }
    }
}

pub(crate) fn coherent_amplitudes(n: usize, alpha: C64) -> Array1<C64> {
    let mut amps = Array1::<C64>::zeros(n);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for k in 0..n {
        if k > 0 {
            c = c * alpha / (k as f64).sqrt();
        }
        amps[k] = c;
    }
    amps
}

/// Cat-qubit basis states built on the coherent pair |±α⟩.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatKind {
    /// |α⟩
    Coherent,
    /// |+⟩_α ∝ |α⟩ + |−α⟩, even photon numbers only
    Plus,
    /// |−⟩_α ∝ |α⟩ − |−α⟩, odd photon numbers only
    Minus,
    /// |0⟩_α = (|+⟩_α + |−⟩_α)/√2
    Zero,
    /// |1⟩_α = (|+⟩_α − |−⟩_α)/√2
    One,
}

impl FromStr for CatKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coherent" => Ok(Self::Coherent),
            "plus" => Ok(Self::Plus),
            "minus" => Ok(Self::Minus),
            "zero" => Ok(Self::Zero),
            "one" => Ok(Self::One),
            other => Err(Error::InvalidKind(other.to_string())),
        }
    }
}

fn parity_projected(amps: &Array1<C64>, odd: bool) -> Array1<C64> {
    let mut out = amps.clone();
    for (k, z) in out.iter_mut().enumerate() {
        if (k % 2 == 1) != odd {
            *z = C64::new(0.0, 0.0);
        }
    }
    out
}

/// Single-mode cat basis state with truncation `n`.
pub fn cat_basis_state(n: usize, alpha: C64, kind: CatKind) -> Result<Ket> {
    let need = min_truncation(alpha.norm());
    if n < need {
        return Err(Error::TruncationTooSmall {
            have: n,
            need,
            context: format!("cat state with |alpha| = {:.3}", alpha.norm()),
        });
    }
    let sig = SpaceSig::single(n)?;
    let coh = coherent_amplitudes(n, alpha);
    let plus = || Ket::new(sig.clone(), parity_projected(&coh, false));
    let minus = || {
        if alpha.norm() == 0.0 {
            return Err(Error::OddCatAtZero);
        }
        Ket::new(sig.clone(), parity_projected(&coh, true))
    };
    match kind {
        CatKind::Coherent => Ket::new(sig.clone(), coh.clone()),
        CatKind::Plus => plus(),
        CatKind::Minus => minus(),
        CatKind::Zero | CatKind::One => {
            let p = plus()?;
            let m = minus()?;
            let sign = if kind == CatKind::Zero { 1.0 } else { -1.0 };
            let amps = (&p.amps + &(&m.amps * C64::new(sign, 0.0))) / C64::new(2f64.sqrt(), 0.0);
            Ok(Ket { sig, amps })
        }
    }
}

/// Density operator on a truncated space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    sig: SpaceSig,
    data: Array2<C64>,
}

/// Tolerances enforced by [`DensityMatrix::validate`].
pub(crate) const TRACE_TOL: f64 = 1e-9;
pub(crate) const HERM_TOL: f64 = 1e-10;
pub(crate) const POSITIVITY_TOL: f64 = 1e-8;

impl DensityMatrix {
    /// Wraps `data` after checking trace, Hermiticity and positivity.
    pub fn from_matrix(sig: SpaceSig, data: Array2<C64>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(sig, data)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Shape is still checked; the physical invariants are not.
    pub fn from_matrix_unchecked(sig: SpaceSig, data: Array2<C64>) -> Result<Self> {
        let dim = sig.total_dim();
        if data.nrows() != dim || data.ncols() != dim {
            return Err(Error::ShapeMismatch { rows: data.nrows(), cols: data.ncols(), dim });
        }
        Ok(Self { sig, data })
    }

    pub fn pure(ket: &Ket) -> Self {
        ket.to_density()
    }

    pub fn maximally_mixed(sig: &SpaceSig) -> Self {
        let d = sig.total_dim();
        Self {
            sig: sig.clone(),
            data: Array2::from_diag_elem(d, C64::new(1.0 / d as f64, 0.0)),
        }
    }

    /// Convex combination Σ w_k ρ_k; weights must be non-negative and sum to 1.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        let sig = first.1.sig.clone();
        let mut data = Array2::<C64>::zeros(first.1.data.raw_dim());
        let mut total = 0.0;
        for (w, rho) in parts {
            sig.ensure_same(&rho.sig)?;
            if *w < 0.0 {
                return Err(Error::InvalidState("negative mixture weight".into()));
            }
            data.scaled_add(C64::new(*w, 0.0), &rho.data);
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("mixture weights sum to {total}")));
        }
        Ok(Self { sig, data })
    }

    pub fn sig(&self) -> &SpaceSig {
        &self.sig
    }

    pub fn data(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<C64> {
        self.data
    }

    pub fn trace(&self) -> C64 {
        self.data.diag().sum()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        hermitian_deviation(&self.data)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.data.nrows();
        // symmetrize so the solver sees an exactly Hermitian input
        let m = DMatrix::from_fn(n, n, |i, j| (self.data[[i, j]] + self.data[[j, i]].conj()) * 0.5);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// ⟨ψ|ρ|ψ⟩.
    pub fn fidelity_pure(&self, ket: &Ket) -> Result<f64> {
        self.sig.ensure_same(ket.sig())?;
        let v = self.data.dot(ket.amplitudes());
        Ok(ket.amplitudes().iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().re)
    }

    /// Photon-number (diagonal) populations.
    pub fn populations(&self) -> Vec<f64> {
        self.data.diag().iter().map(|z| z.re).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let dev = self.hermitian_deviation();
        if dev > HERM_TOL {
            return Err(Error::InvalidState(format!("Hermiticity deviation {dev:e}")));
        }
        let lam = self.min_eigenvalue();
        if lam < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("minimum eigenvalue {lam:e}")));
        }
        Ok(())
    }

    /// `self ⊗ other`.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let (n, m) = (self.data.nrows(), other.data.nrows());
        let data = Array2::from_shape_fn((n * m, n * m), |(i, j)| {
            self.data[[i / m, j / m]] * other.data[[i % m, j % m]]
        });
        DensityMatrix { sig: self.sig.join(&other.sig), data }
    }

    /// Reduced state of `mode`, tracing out every other mode.
    pub fn partial_trace_keep(&self, mode: usize) -> Result<DensityMatrix> {
        self.sig.check_mode(mode)?;
        let d = self.sig.dims()[mode];
        let after = self.sig.stride(mode);
        let before = self.sig.total_dim() / (d * after);
        let mut out = Array2::<C64>::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..before {
                    for a in 0..after {
                        acc += self.data[[(b * d + i) * after + a, (b * d + j) * after + a]];
                    }
                }
                out[[i, j]] = acc;
            }
        }
        Ok(DensityMatrix { sig: SpaceSig::single(d)?, data: out })
    }
}

/// Result of a Hermitian expectation value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expectation {
    pub value: f64,
    /// |Im Tr[ρO]|, nonzero only through rounding or a non-Hermitian ρ.
    pub imag_residue: f64,
}

/// Tr[ρO].
pub fn expectation(rho: &DensityMatrix, obs: &Operator) -> Result<C64> {
    rho.sig.ensure_same(obs.sig())?;
    Ok(trace_product(&rho.data, obs.data()))
}

/// Tr[ρO] for Hermitian `obs`, split into its real value and imaginary residue.
pub fn expectation_real(rho: &DensityMatrix, obs: &Operator) -> Result<Expectation> {
    let dev = obs.hermitian_deviation();
    if dev >= 1e-12 {
        return Err(Error::NotHermitian(dev));
    }
    let v = expectation(rho, obs)?;
    Ok(Expectation { value: v.re, imag_residue: v.im.abs() })
}

/// Tr[AB] without forming the product.
pub(crate) fn trace_product(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[[i, k]] * b[[k, i]];
        }
    }
    acc
}
