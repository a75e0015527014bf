//! Truncated Fock-space operator algebra.
//!
//! A [`SpaceSig`] lists the per-mode truncations. Basis ordering puts mode 0
//! as the slowest index, so for dims `[Na, Nb, 2]` the global index of
//! `|n, m, q⟩` is `(n * Nb + m) * 2 + q`.

mod expm;
mod state;
mod wire;

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use expm::expm;
pub use state::{
    cat_basis_state, expectation, expectation_real, CatKind, DensityMatrix, Expectation, Ket,
};

/// Smallest truncation that keeps the coherent-state tail of amplitude
/// `|amplitude|` below ~1e-8: `ceil(|a|^2 + 6|a| + 10)`.
pub fn min_truncation(amplitude: f64) -> usize {
    let a = amplitude.abs();
    (a * a + 6.0 * a + 10.0).ceil() as usize
}

/// Extra levels used internally when exponentiating in a truncated space.
pub const DISPLACEMENT_PADDING: usize = 10;

/// Ordered per-mode truncation dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct SpaceSig {
    dims: Vec<usize>,
}

impl SpaceSig {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::InvalidSig("no modes".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidSig(format!("mode {pos} has dimension 0")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidSig("total dimension overflows".into()))?;
        Ok(Self { dims })
    }

    pub fn single(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub(crate) fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.dims.len() {
            return Err(Error::ModeOutOfRange { mode, n_modes: self.dims.len() });
        }
        Ok(())
    }

    /// Product of the dimensions of all modes after `mode`.
    pub fn stride(&self, mode: usize) -> usize {
        self.dims[mode + 1..].iter().product()
    }

    /// Global basis index of the per-mode levels.
    pub fn index(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.dims.len() {
            return Err(Error::InvalidSig(format!(
                "expected {} levels, got {}",
                self.dims.len(),
                levels.len()
            )));
        }
        let mut idx = 0;
        for (&l, &d) in levels.iter().zip(&self.dims) {
            if l >= d {
                return Err(Error::InvalidSig(format!("level {l} outside dimension {d}")));
            }
            idx = idx * d + l;
        }
        Ok(idx)
    }

    /// Per-mode levels of a global basis index.
    pub fn levels(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = idx % d;
            idx /= d;
        }
        out
    }

    /// Signature of the tensor product `self ⊗ other`.
    pub fn join(&self, other: &SpaceSig) -> SpaceSig {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        SpaceSig { dims }
    }

    pub(crate) fn ensure_same(&self, other: &SpaceSig) -> Result<()> {
        if self != other {
            return Err(Error::SigMismatch { left: self.dims.clone(), right: other.dims.clone() });
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for SpaceSig {
    type Error = Error;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<SpaceSig> for Vec<usize> {
    fn from(sig: SpaceSig) -> Self {
        sig.dims
    }
}

impl fmt::Display for SpaceSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "[{}]", parts.join("x"))
    }
}

pub(crate) fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn hermitian_deviation(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    dev
}

/// Dense operator on a truncated Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    sig: SpaceSig,
    data: Array2<C64>,
}

impl Operator {
    pub fn from_matrix(sig: SpaceSig, data: Array2<C64>) -> Result<Self> {
        let dim = sig.total_dim();
        if data.nrows() != dim || data.ncols() != dim {
            return Err(Error::ShapeMismatch { rows: data.nrows(), cols: data.ncols(), dim });
        }
        Ok(Self { sig, data })
    }

    /// Like [`Operator::from_matrix`], additionally requiring O = O† within 1e-12.
    pub fn hermitian(sig: SpaceSig, data: Array2<C64>) -> Result<Self> {
        let op = Self::from_matrix(sig, data)?;
        let dev = op.hermitian_deviation();
        if dev >= 1e-12 {
            return Err(Error::NotHermitian(dev));
        }
        Ok(op)
    }

    pub fn zeros(sig: &SpaceSig) -> Self {
        let d = sig.total_dim();
        Self { sig: sig.clone(), data: Array2::zeros((d, d)) }
    }

    pub fn identity(sig: &SpaceSig) -> Self {
        let d = sig.total_dim();
        Self { sig: sig.clone(), data: Array2::from_diag_elem(d, C64::new(1.0, 0.0)) }
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

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self { sig: self.sig.clone(), data: self.data.t().mapv(|z| z.conj()) }
    }

    pub fn hermitian_deviation(&self) -> f64 {
        hermitian_deviation(&self.data)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() < tol
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        self.data
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, c: impl Into<C64>) -> Self {
        let c = c.into();
        Self { sig: self.sig.clone(), data: &self.data * c }
    }

    pub fn matmul(&self, rhs: &Operator) -> Result<Self> {
        self.sig.ensure_same(&rhs.sig)?;
        Ok(Self { sig: self.sig.clone(), data: self.data.dot(&rhs.data) })
    }

    pub fn try_add(&self, rhs: &Operator) -> Result<Self> {
        self.sig.ensure_same(&rhs.sig)?;
        Ok(Self { sig: self.sig.clone(), data: &self.data + &rhs.data })
    }

    /// [A, B] = AB − BA.
    pub fn commutator(&self, rhs: &Operator) -> Result<Self> {
        self.sig.ensure_same(&rhs.sig)?;
        let data = self.data.dot(&rhs.data) - rhs.data.dot(&self.data);
        Ok(Self { sig: self.sig.clone(), data })
    }

    pub fn powi(&self, k: u32) -> Self {
        let mut out = Self::identity(&self.sig);
        for _ in 0..k {
            out.data = out.data.dot(&self.data);
        }
        out
    }

    /// Tensor product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Operator) -> Self {
        let (n, m) = (self.dim(), rhs.dim());
        let data = Array2::from_shape_fn((n * m, n * m), |(i, j)| {
            self.data[[i / m, j / m]] * rhs.data[[i % m, j % m]]
        });
        Self { sig: self.sig.join(&rhs.sig), data }
    }

    /// Restrict the matrix to the first `n` basis states of every mode.
    pub fn crop(&self, dims: &[usize]) -> Result<Self> {
        let sig = SpaceSig::new(dims.to_vec())?;
        if dims.len() != self.sig.n_modes()
            || dims.iter().zip(self.sig.dims()).any(|(&a, &b)| a > b)
        {
            return Err(Error::InvalidSig(format!("cannot crop {} to {}", self.sig, sig)));
        }
        let idx: Vec<usize> = (0..sig.total_dim())
            .map(|i| self.sig.index(&sig.levels(i)).expect("levels fit"))
            .collect();
        let d = idx.len();
        let data = Array2::from_shape_fn((d, d), |(i, j)| self.data[[idx[i], idx[j]]]);
        Ok(Self { sig, data })
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.try_add(rhs).expect("operator signatures must match")
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.sig.ensure_same(&rhs.sig).expect("operator signatures must match");
        Operator { sig: self.sig.clone(), data: &self.data - &rhs.data }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs).expect("operator signatures must match")
    }
}

/// Single-mode operator kinds accepted by [`mode_operator`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeOp {
    Annihilation,
    Creation,
    Number,
    Parity,
    Identity,
}

impl FromStr for ModeOp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "annihilation" | "a" => Ok(Self::Annihilation),
            "creation" | "adag" => Ok(Self::Creation),
            "number" | "n" => Ok(Self::Number),
            "parity" | "P" => Ok(Self::Parity),
            "identity" | "I" => Ok(Self::Identity),
            other => Err(Error::InvalidKind(other.to_string())),
        }
    }
}

fn local_matrix(n: usize, kind: ModeOp) -> Array2<C64> {
    let mut m = Array2::<C64>::zeros((n, n));
    match kind {
        ModeOp::Annihilation => {
            for k in 1..n {
                m[[k - 1, k]] = C64::new((k as f64).sqrt(), 0.0);
            }
        }
        ModeOp::Creation => {
            for k in 1..n {
                m[[k, k - 1]] = C64::new((k as f64).sqrt(), 0.0);
            }
        }
        ModeOp::Number => {
            for k in 0..n {
                m[[k, k]] = C64::new(k as f64, 0.0);
            }
        }
        ModeOp::Parity => {
            for k in 0..n {
                m[[k, k]] = C64::new(if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
            }
        }
        ModeOp::Identity => {
            for k in 0..n {
                m[[k, k]] = C64::new(1.0, 0.0);
            }
        }
    }
    m
}

/// Embed a single-mode matrix acting on `mode` into the full space.
pub fn embed(sig: &SpaceSig, mode: usize, local: &Array2<C64>) -> Result<Operator> {
    sig.check_mode(mode)?;
    let d = sig.dims()[mode];
    if local.nrows() != d || local.ncols() != d {
        return Err(Error::ShapeMismatch { rows: local.nrows(), cols: local.ncols(), dim: d });
    }
    let after = sig.stride(mode);
    let before = sig.total_dim() / (d * after);
    let total = sig.total_dim();
    let mut data = Array2::<C64>::zeros((total, total));
    for b in 0..before {
        for i in 0..d {
            for j in 0..d {
                let v = local[[i, j]];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                let row0 = (b * d + i) * after;
                let col0 = (b * d + j) * after;
                for a in 0..after {
                    data[[row0 + a, col0 + a]] = v;
                }
            }
        }
    }
    Operator::from_matrix(sig.clone(), data)
}

/// Annihilation, creation, number, parity or identity operator of one mode.
pub fn mode_operator(sig: &SpaceSig, mode: usize, kind: ModeOp) -> Result<Operator> {
    sig.check_mode(mode)?;
    let d = sig.dims()[mode];
    if kind != ModeOp::Identity && d < 2 {
        return Err(Error::TruncationTooSmall {
            have: d,
            need: 2,
            context: format!("{kind:?} on mode {mode}"),
        });
    }
    embed(sig, mode, &local_matrix(d, kind))
}

/// Single-mode displacement matrix exp(βa† − β*a), exponentiated at `n + pad` levels
/// and cropped to `n`.
pub(crate) fn displacement_matrix(n: usize, beta: C64, pad: usize) -> Array2<C64> {
    let m = n + pad;
    let mut gen = Array2::<C64>::zeros((m, m));
    for k in 1..m {
        let s = (k as f64).sqrt();
        gen[[k, k - 1]] = beta * s;
        gen[[k - 1, k]] = -beta.conj() * s;
    }
    let full = expm(&gen);
    full.slice(ndarray::s![0..n, 0..n]).to_owned()
}

/// Displacement operator D(β) = exp(βa† − β*a) on `mode`.
///
/// Rejects truncations below [`min_truncation`] for |β|.
pub fn displacement(sig: &SpaceSig, mode: usize, beta: C64) -> Result<Operator> {
    sig.check_mode(mode)?;
    let n = sig.dims()[mode];
    if beta == C64::new(0.0, 0.0) {
        return Ok(Operator::identity(sig));
    }
    let need = min_truncation(beta.norm());
    if n < need {
        return Err(Error::TruncationTooSmall {
            have: n,
            need,
            context: format!("displacement by |beta| = {:.3}", beta.norm()),
        });
    }
    embed(sig, mode, &displacement_matrix(n, beta, DISPLACEMENT_PADDING))
}
