use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid space signature: {0}")]
    InvalidSig(String),

    #[error("space signature mismatch: {left:?} vs {right:?}")]
    SigMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("mode index {mode} out of range for {n_modes} mode(s)")]
    ModeOutOfRange { mode: usize, n_modes: usize },

    #[error("invalid operator kind: {0}")]
    InvalidKind(String),

    #[error("truncation {have} too small, need at least {need} ({context})")]
    TruncationTooSmall { have: usize, need: usize, context: String },

    #[error("odd cat state is undefined at zero amplitude")]
    OddCatAtZero,

    #[error("matrix shape {rows}x{cols} does not match space dimension {dim}")]
    ShapeMismatch { rows: usize, cols: usize, dim: usize },

    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("trace drift {drift:e} exceeds tolerance {tol:e} at t = {t}")]
    TraceDrift { drift: f64, tol: f64, t: f64 },

    #[error("negative eigenvalue {value:e} at t = {t}")]
    NegativeEigenvalue { value: f64, t: f64 },

    #[error("integrator step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no metastable direction: detuning {delta} exceeds kappa_c/2 = {half_kappa_c}")]
    NoMetastableDirection { delta: f64, half_kappa_c: f64 },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
