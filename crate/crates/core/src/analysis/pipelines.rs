//! Experiment pipelines: bit-flip and phase-flip scans, the detuning sweep
//! used to calibrate κ₂, and the drive calibration of the cat size.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use super::fit::{fit_exp_decay, levenberg_marquardt, linear_fit, FitResult, LmOptions, Offset};
use super::wigner::{fit_cat_size, husimi_imbalance, wigner};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hilbert::{cat_basis_state, expectation, min_truncation, CatKind, DensityMatrix, ModeOp};
use crate::lindblad::{
    evolve, relax_to_steady, steady_state, EvolutionSpec, IntegrationStats, Tolerances, DIRECT_STEADY_MAX_DIM,
};
use crate::models::{kappa2_effective, ModelSpec, Rung};

fn linspace(end: f64, samples: usize) -> Vec<f64> {
    (0..samples).map(|k| end * k as f64 / (samples - 1) as f64).collect()
}

/// `spec` at drive strength `alpha_sq`, with the cat truncation raised to
/// the minimum that amplitude needs.
pub fn spec_at(spec: &ModelSpec, alpha_sq: f64) -> ModelSpec {
    let mut s = spec.clone();
    s.alpha_sq = alpha_sq;
    if let Some(n) = s.truncations.first_mut() {
        *n = (*n).max(min_truncation(alpha_sq.max(0.0).sqrt()));
    }
    s
}

/// Drive α² whose metastable wells sit at |α_∞|² = `cat_size` under
/// single-photon loss: cat_size + κ_a/(2κ₂).
pub fn drive_for_cat_size(spec: &ModelSpec, cat_size: f64) -> Result<f64> {
    let k2 = kappa2_effective(spec.params.g2, spec.params.kappa_b);
    if !(k2 > 0.0) {
        return Err(Error::InvalidParameter("two-photon loss rate must be positive".into()));
    }
    Ok(cat_size + spec.params.kappa_a / (2.0 * k2))
}

/// Default transient skipped before fitting: ten confinement times, plus two
/// transmon lifetimes when the transmon is modelled so it can thermalize.
fn default_settle(spec: &ModelSpec) -> f64 {
    let kc = 2.0 * spec.alpha_sq * spec.kappa2();
    let mut t = if kc > 0.0 { 10.0 / kc } else { 0.0 };
    if spec.rung == Rung::ThreeMode {
        t += 2.0 * spec.params.t1_q;
    }
    t
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BitflipOptions {
    /// Simulated duration (µs).
    pub horizon: f64,
    pub samples: usize,
    /// Samples before this time (µs) are excluded from the fit.
    pub settle: Option<f64>,
    /// Also fit the right/left Husimi imbalance.
    pub husimi: bool,
    pub tolerances: Tolerances,
}

impl BitflipOptions {
    pub fn new(horizon: f64) -> Self {
        Self { horizon, samples: 201, settle: None, husimi: false, tolerances: Tolerances::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BitflipPoint {
    /// Drive α².
    pub alpha_sq: f64,
    /// |⟨a²⟩| at the end of the run.
    pub alpha_inf_sq: f64,
    /// µs; infinite when ⟨a⟩ shows no decay.
    pub t_bitflip: f64,
    pub t_stderr: Option<f64>,
    pub fit: FitResult,
    pub husimi_fit: Option<FitResult>,
    pub stats: IntegrationStats,
}

fn fit_after(ts: &[f64], ys: &[f64], settle: f64) -> Result<FitResult> {
    let start = ts.iter().position(|t| *t >= settle).unwrap_or(ts.len());
    fit_exp_decay(&ts[start..], &ys[start..], Offset::Fixed(0.0))
}

/// One bit-flip measurement: start in the coherent state |α⟩, record
/// Re⟨a⟩ and fit A·e^{−t/T} with the asymptote pinned at 0, which the
/// a → −a symmetry of every model imposes on the steady state.
pub fn bitflip_point(spec: &ModelSpec, alpha_sq: f64, opts: &BitflipOptions) -> Result<BitflipPoint> {
    if !(alpha_sq >= 0.0) {
        return Err(Error::InvalidParameter("alpha_sq must be >= 0".into()));
    }
    if !(opts.horizon > 0.0) || opts.samples < 2 {
        return Err(Error::InvalidParameter("bit-flip scan needs a positive horizon and >= 2 samples".into()));
    }
    let spec = spec_at(spec, alpha_sq);
    spec.validate()?;
    let settle = opts.settle.unwrap_or_else(|| default_settle(&spec));
    let times = linspace(opts.horizon, opts.samples);
    if times.iter().filter(|t| **t >= settle).count() < 5 {
        return Err(Error::InvalidParameter(format!(
            "horizon {} us leaves fewer than 5 samples after the {settle:.3} us settle window",
            opts.horizon
        )));
    }
    let (h, losses) = spec.build()?;
    let a = spec.cat_op(ModeOp::Annihilation)?;
    let mut es = EvolutionSpec::new(h, losses, times)
        .observe("a", a.clone())
        .observe("a2", &a * &a)
        .with_tolerances(opts.tolerances);
    if opts.husimi {
        es = es.observe("husimi", husimi_imbalance(&spec.sig()?, 0)?);
    }
    let cat = cat_basis_state(spec.truncations[0], C64::new(alpha_sq.sqrt(), 0.0), CatKind::Coherent)?;
    let rho0 = spec.embed_cat_state(&cat, false)?;
    let series = evolve(&es, &rho0)?;
    let re_a = series.real("a").expect("observed");
    let fit = fit_after(&series.times, &re_a, settle)?;
    let husimi_fit = if opts.husimi {
        Some(fit_after(&series.times, &series.real("husimi").expect("observed"), settle)?)
    } else {
        None
    };
    let a2 = series.column("a2").expect("observed");
    Ok(BitflipPoint {
        alpha_sq,
        alpha_inf_sq: a2[a2.len() - 1].norm(),
        t_bitflip: fit.param("T")?,
        t_stderr: fit.stderr_of("T"),
        fit,
        husimi_fit,
        stats: series.stats,
    })
}

/// [`bitflip_point`] for every drive α², evaluated concurrently.
pub fn bitflip_scan(spec: &ModelSpec, alpha_sq_list: &[f64], opts: &BitflipOptions) -> Result<Vec<BitflipPoint>> {
    if alpha_sq_list.is_empty() {
        return Err(Error::InvalidParameter("alpha_sq list is empty".into()));
    }
    alpha_sq_list.par_iter().map(|&a2| bitflip_point(spec, a2, opts)).collect()
}

fn num(v: Option<f64>) -> String {
    format!("{:.16e}", v.unwrap_or(f64::NAN))
}

/// `alpha_sq,alpha_inf_sq,T_us,T_stderr_us`; a missing error is written as NaN.
pub fn write_bitflip_csv(points: &[BitflipPoint], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "alpha_sq,alpha_inf_sq,T_us,T_stderr_us")?;
    for p in points {
        writeln!(w, "{:.16e},{:.16e},{:.16e},{}", p.alpha_sq, p.alpha_inf_sq, p.t_bitflip, num(p.t_stderr))?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseflipOptions {
    /// µs; defaults to 1.5/(2κ_a|α_∞|²), one and a half expected lifetimes.
    pub horizon: Option<f64>,
    pub samples: usize,
    pub tolerances: Tolerances,
}

impl Default for PhaseflipOptions {
    fn default() -> Self {
        Self { horizon: None, samples: 101, tolerances: Tolerances::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseflipPoint {
    /// Cat size |α_∞|².
    pub alpha_sq: f64,
    /// Drive α² that places the wells at that size.
    pub drive_alpha_sq: f64,
    /// µs⁻¹
    pub gamma: f64,
    pub gamma_stderr: Option<f64>,
    pub fit: FitResult,
    pub stats: IntegrationStats,
}

/// Parity coherence decay of a cat of size `cat_size`: the cat states |±⟩
/// at amplitude √cat_size are evolved under the drive that holds them there,
/// and ⟨P⟩₊ − ⟨P⟩₋ is fitted to A·e^{−Γt}.
pub fn phaseflip_point(spec: &ModelSpec, cat_size: f64, opts: &PhaseflipOptions) -> Result<PhaseflipPoint> {
    if !(cat_size > 0.0) {
        return Err(Error::InvalidParameter("phase-flip scan needs alpha_sq > 0 (|-> is undefined at 0)".into()));
    }
    let drive = drive_for_cat_size(spec, cat_size)?;
    let spec = spec_at(spec, drive);
    spec.validate()?;
    let kappa_a = crate::models::units::to_angular(spec.params.kappa_a);
    let horizon = match opts.horizon {
        Some(h) => h,
        None if kappa_a > 0.0 => 1.5 / (2.0 * kappa_a * cat_size),
        None => return Err(Error::InvalidParameter("kappa_a = 0 needs an explicit horizon".into())),
    };
    if !(horizon > 0.0) || opts.samples < 5 {
        return Err(Error::InvalidParameter("phase-flip scan needs a positive horizon and >= 5 samples".into()));
    }
    let (h, losses) = spec.build()?;
    let es = EvolutionSpec::new(h, losses, linspace(horizon, opts.samples))
        .observe("parity", spec.cat_op(ModeOp::Parity)?)
        .with_tolerances(opts.tolerances);
    let n = spec.truncations[0];
    let alpha = C64::new(cat_size.sqrt(), 0.0);
    let run = |kind: CatKind| -> Result<(Vec<f64>, Vec<f64>, IntegrationStats)> {
        let rho0 = spec.embed_cat_state(&cat_basis_state(n, alpha, kind)?, false)?;
        let s = evolve(&es, &rho0)?;
        Ok((s.times.clone(), s.real("parity").expect("observed"), s.stats))
    };
    let (ts, plus, stats) = run(CatKind::Plus)?;
    let (_, minus, _) = run(CatKind::Minus)?;
    let diff: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| p - m).collect();
    let fit = fit_exp_decay(&ts, &diff, Offset::Fixed(0.0))?;
    let t = fit.param("T")?;
    Ok(PhaseflipPoint {
        alpha_sq: cat_size,
        drive_alpha_sq: drive,
        gamma: 1.0 / t,
        gamma_stderr: fit.stderr_of("T").map(|s| s / (t * t)),
        fit,
        stats,
    })
}

/// [`phaseflip_point`] for every cat size, evaluated concurrently.
pub fn phaseflip_scan(spec: &ModelSpec, cat_sizes: &[f64], opts: &PhaseflipOptions) -> Result<Vec<PhaseflipPoint>> {
    if cat_sizes.is_empty() {
        return Err(Error::InvalidParameter("alpha_sq list is empty".into()));
    }
    cat_sizes.par_iter().map(|&s| phaseflip_point(spec, s, opts)).collect()
}

/// `alpha_sq,gamma_per_us,stderr`.
pub fn write_phaseflip_csv(points: &[PhaseflipPoint], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "alpha_sq,gamma_per_us,stderr")?;
    for p in points {
        writeln!(w, "{:.16e},{:.16e},{}", p.alpha_sq, p.gamma, num(p.gamma_stderr))?;
    }
    Ok(())
}

/// The unique steady state of `spec`, by direct solve when small enough and
/// by long relaxation from vacuum otherwise.
pub fn model_steady_state(spec: &ModelSpec) -> Result<DensityMatrix> {
    let (h, losses) = spec.build()?;
    let sig = spec.sig()?;
    if sig.total_dim() <= DIRECT_STEADY_MAX_DIM {
        return steady_state(&h, &losses);
    }
    let vac = DensityMatrix::pure(&crate::hilbert::Ket::fock(&sig, &vec![0; sig.n_modes()])?);
    let slowest = [spec.params.kappa_a, kappa2_effective(spec.params.g2, spec.params.kappa_b)]
        .into_iter()
        .map(crate::models::units::to_angular)
        .filter(|r| *r > 0.0)
        .fold(f64::INFINITY, f64::min);
    let ss = relax_to_steady(&h, &losses, &vac, 200.0 / slowest, 1e-5, Tolerances::default())?;
    if !ss.converged {
        return Err(Error::InvalidState(format!("no steady state within 200 slowest lifetimes (residual {:e})", ss.residual)));
    }
    Ok(ss.state)
}

/// Steady-state parity against cat-mode detuning.
#[derive(Clone, Debug, PartialEq)]
pub struct ParityCurve {
    /// One-mode model the curve was computed for (its detuning is ignored).
    pub spec: ModelSpec,
    /// MHz
    pub deltas: Vec<f64>,
    pub parity: Vec<f64>,
}

impl ParityCurve {
    /// Smallest Δ > 0 (MHz) at which the parity climbs back halfway from its
    /// minimum over the curve to its value at the largest detuning sampled.
    pub fn half_width(&self) -> Option<f64> {
        let mut pos: Vec<(f64, f64)> =
            self.deltas.iter().zip(&self.parity).filter(|(d, _)| **d >= 0.0).map(|(d, p)| (*d, *p)).collect();
        pos.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (imin, pmin) = pos.iter().enumerate().map(|(i, x)| (i, x.1)).min_by(|a, b| a.1.total_cmp(&b.1))?;
        let far = pos.last()?.1;
        let mid = 0.5 * (pmin + far);
        for w in pos[imin..].windows(2) {
            let ((d0, p0), (d1, p1)) = (w[0], w[1]);
            if (p0 - mid) * (p1 - mid) <= 0.0 && p1 != p0 {
                return Some(d0 + (mid - p0) * (d1 - d0) / (p1 - p0));
            }
        }
        None
    }
}

fn require_one_mode(spec: &ModelSpec) -> Result<()> {
    if spec.rung != Rung::OneMode {
        return Err(Error::Unsupported("the detuning sweep is defined on the one-mode model".into()));
    }
    Ok(())
}

/// Steady-state ⟨P⟩ of the one-mode model with +Δa†a added, per Δ (MHz).
pub fn parity_vs_detuning(spec: &ModelSpec, deltas: &[f64]) -> Result<ParityCurve> {
    require_one_mode(spec)?;
    if deltas.is_empty() {
        return Err(Error::InvalidParameter("detuning list is empty".into()));
    }
    let spec = spec_at(spec, spec.alpha_sq);
    let parity_op = spec.cat_op(ModeOp::Parity)?;
    let parity = deltas
        .par_iter()
        .map(|&d| {
            let rho = model_steady_state(&spec.clone().with_detuning(d))?;
            Ok(expectation(&rho, &parity_op)?.re)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ParityCurve { spec, deltas: deltas.to_vec(), parity })
}

/// `spec` with g₂ chosen so that 4g₂²/κ_b equals `kappa2` (MHz).
fn with_kappa2(spec: &ModelSpec, kappa2: f64) -> ModelSpec {
    let mut s = spec.clone();
    s.params.g2 = (kappa2 * s.params.kappa_b).sqrt() / 2.0;
    s
}

/// Least squares of contrast·P_sim(Δ; κ₂) against the measured curve, with
/// P_sim the simulated steady-state parity at cat drive `alpha_sq`. The
/// κ₂ derivative is a central difference of the template; the starting κ₂
/// is the curve's half width divided by α², so the detunings must extend
/// past that width.
pub fn fit_kappa2(curve: &ParityCurve, alpha_sq: f64) -> Result<FitResult> {
    require_one_mode(&curve.spec)?;
    if !(alpha_sq > 0.0) {
        return Err(Error::InvalidParameter("alpha_sq must be positive".into()));
    }
    if !(curve.spec.params.kappa_b > 0.0) {
        return Err(Error::InvalidParameter("kappa_b must be positive to map kappa2 onto g2".into()));
    }
    let base = spec_at(&curve.spec, alpha_sq);
    let template = |k2: f64| -> Result<Vec<f64>> {
        Ok(parity_vs_detuning(&with_kappa2(&base, k2), &curve.deltas)?.parity)
    };
    let k0 = curve.half_width().map(|w| w / alpha_sq).filter(|k| *k > 0.0).ok_or_else(|| {
        Error::InvalidParameter("detuning list does not reach past the parity window (no half width)".into())
    })?;
    let t0 = template(k0)?;
    let tt: f64 = t0.iter().map(|t| t * t).sum();
    let c0 = if tt > 0.0 { t0.iter().zip(&curve.parity).map(|(t, y)| t * y).sum::<f64>() / tt } else { 1.0 };

    let m = curve.deltas.len();
    let rel = 1e-4;
    let outcome = levenberg_marquardt(
        |p| {
            let (c, k2) = (p[0], p[1]);
            if !(k2 > 0.0) {
                return Ok(None);
            }
            let t = template(k2)?;
            let up = template(k2 * (1.0 + rel))?;
            let down = template(k2 * (1.0 - rel))?;
            let r = DVector::from_iterator(m, t.iter().zip(&curve.parity).map(|(t, y)| c * t - y));
            let j = DMatrix::from_fn(m, 2, |i, k| {
                if k == 0 {
                    t[i]
                } else {
                    c * (up[i] - down[i]) / (2.0 * rel * k2)
                }
            });
            Ok(Some((r, j)))
        },
        &[c0, k0],
        LmOptions::default(),
    )?;
    let names = ["contrast", "kappa2"];
    Ok(FitResult {
        params: names.iter().map(|n| n.to_string()).zip(outcome.params.iter().copied()).collect(),
        stderr: outcome.stderr().map(|se| names.iter().map(|n| n.to_string()).zip(se).collect()),
        residual_rms: outcome.rms(),
        initial_rms: outcome.initial_rms(),
        converged: outcome.converged,
        iterations: outcome.iterations,
        flag: None,
    })
}

/// Fits |α_∞|² = slope·|ε_d| − offset through the pairs whose cat size is
/// nonzero (below threshold the wells have merged and the law does not
/// apply). The offset estimates κ_a/(2κ₂).
pub fn drive_calibration(pairs: &[(f64, f64)]) -> Result<FitResult> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().filter(|(_, s)| *s > 0.0).map(|(e, s)| (e.abs(), *s)).unzip();
    if xs.len() < 2 {
        return Err(Error::InvalidParameter("drive calibration needs two points above threshold".into()));
    }
    let line = linear_fit(&xs, &ys)?;
    let slope = line.param("slope")?;
    let offset = -line.param("intercept")?;
    Ok(FitResult {
        params: vec![("slope".into(), slope), ("offset".into(), offset)],
        stderr: Some(vec![
            ("slope".into(), line.stderr_of("slope").unwrap_or(f64::NAN)),
            ("offset".into(), line.stderr_of("intercept").unwrap_or(f64::NAN)),
        ]),
        ..line
    })
}

/// |α_∞|² of the steady state at drive `alpha_sq`, from a two-lobe fit of
/// its Wigner map. Returns the pair (|ε_d| in MHz, fit).
pub fn steady_cat_size(spec: &ModelSpec, alpha_sq: f64, resolution: usize) -> Result<(f64, FitResult)> {
    let spec = spec_at(spec, alpha_sq);
    let rho = model_steady_state(&spec)?;
    let cat = if spec.rung == Rung::OneMode { rho } else { rho.partial_trace_keep(0)? };
    let half = alpha_sq.sqrt() + 2.5;
    let map = wigner(&cat, &Grid::square(half, resolution)?)?;
    Ok((alpha_sq * spec.params.g2.abs(), fit_cat_size(&map)?))
}
