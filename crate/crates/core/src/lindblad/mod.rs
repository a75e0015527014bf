//! Density-matrix evolution under dρ/dt = −i[H,ρ] + Σ_k D[L_k]ρ with
//! D[O]ρ = OρO† − ½ρO†O − ½O†Oρ.
//!
//! Operators are converted to compressed sparse rows once per evolution; the
//! state stays a dense row-major matrix.

mod dopri;
mod sparse;

use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, Operator, SpaceSig};
use dopri::Dopri;
use sparse::Csr;

/// Lower bound on sampled eigenvalues before an evolution is declared unstable.
pub const POSITIVITY_FLOOR: f64 = -1e-6;
/// Largest ‖ρ − ρ†‖_∞ tolerated at a sample time.
pub const HERMITICITY_CEILING: f64 = 1e-8;

/// Integrator controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Per-step bound on ‖ρ₅ − ρ₄‖_∞ relative to ‖ρ‖_∞.
    pub rel_step_tol: f64,
    /// Allowed |Tr ρ − 1| before renormalizing; larger drift is an error.
    pub trace_tol: f64,
    /// Accepted steps between re-Hermitizations.
    pub herm_resym_period: usize,
    /// Check the smallest eigenvalue at every this-many sample times (0 = never).
    pub positivity_every: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel_step_tol: 1e-7, trace_tol: 1e-6, herm_resym_period: 100, positivity_every: 1 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_step_tol > 0.0) || !(self.trace_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// The Lindblad generator in sparse form.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    sig: SpaceSig,
    // H_eff = H − (i/2) Σ L†L
    heff: Csr,
    heff_dag: Csr,
    jumps: Vec<(Csr, Csr)>,
    max_rate: f64,
}

impl Liouvillian {
    /// `h` must be Hermitian to 1e-12 relative to its largest entry.
    pub fn new(h: &Operator, loss_ops: &[Operator]) -> Result<Self> {
        let sig = h.sig().clone();
        let dev = h.hermitian_deviation();
        if dev > 1e-12 * h.max_abs().max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        let mut heff = h.data().clone();
        let mut jumps = Vec::with_capacity(loss_ops.len());
        let mut decay_rate = 0.0;
        for l in loss_ops {
            sig.ensure_same(l.sig())?;
            let ld = l.dagger();
            let ldl = ld.data().dot(l.data());
            heff.scaled_add(C64::new(0.0, -0.5), &ldl);
            let c = Csr::from_dense(l.data());
            decay_rate += c.norm_inf().powi(2);
            jumps.push((c, Csr::from_dense(ld.data())));
        }
        let heff = Csr::from_dense(&heff);
        let max_rate = heff.norm_inf().max(decay_rate);
        Ok(Self { sig, heff_dag: heff.dagger(), heff, jumps, max_rate })
    }

    pub fn sig(&self) -> &SpaceSig {
        &self.sig
    }

    pub fn dim(&self) -> usize {
        self.sig.total_dim()
    }

    /// Crude bound on the generator's fastest rate, used for the first step.
    pub fn max_rate(&self) -> f64 {
        self.max_rate
    }

    /// dρ/dt for an arbitrary (not necessarily Hermitian) matrix.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<Array2<C64>> {
        self.sig.ensure_same(rho.sig())?;
        let n = self.dim();
        let x: Vec<C64> = rho.data().iter().copied().collect();
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        let i = C64::new(0.0, 1.0);
        self.heff.lmul_acc(-i, &x, &mut out);
        self.heff_dag.rmul_acc(i, &x, &mut out);
        let mut tmp = vec![C64::new(0.0, 0.0); n * n];
        for (l, ld) in &self.jumps {
            tmp.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            l.lmul_acc(C64::new(1.0, 0.0), &x, &mut tmp);
            ld.rmul_acc(C64::new(1.0, 0.0), &tmp, &mut out);
        }
        Ok(Array2::from_shape_vec((n, n), out).expect("square"))
    }

    /// Hot path for Hermitian `rho`: with M = −i H_eff ρ the commutator and
    /// anticommutator parts are M + M†. The output is Hermitian bit for bit,
    /// otherwise the anti-Hermitian rounding residue is amplified by the
    /// non-Hermitian part of H_eff. `scratch` holds two n×n buffers.
    pub(crate) fn rhs_hermitian(&self, rho: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        let n = self.dim();
        let (m, x) = scratch.split_at_mut(n * n);
        m.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        self.heff.lmul_acc(C64::new(0.0, -1.0), rho, m);
        // jump terms summed as 2M + Σ LρL† so a single symmetrization covers both
        m.iter_mut().for_each(|z| *z *= 2.0);
        for (l, ld) in &self.jumps {
            x.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            l.lmul_acc(C64::new(1.0, 0.0), rho, x);
            ld.rmul_acc(C64::new(1.0, 0.0), x, m);
        }
        for i in 0..n {
            for j in i..n {
                let v = (m[i * n + j] + m[j * n + i].conj()) * 0.5;
                out[i * n + j] = v;
                out[j * n + i] = v.conj();
            }
        }
    }
}

/// dρ/dt = −i[H,ρ] + Σ D[L_k]ρ.
pub fn liouvillian_apply(h: &Operator, loss_ops: &[Operator], rho: &DensityMatrix) -> Result<Array2<C64>> {
    Liouvillian::new(h, loss_ops)?.apply(rho)
}

/// Everything `evolve` needs besides the initial state.
#[derive(Clone, Debug)]
pub struct EvolutionSpec {
    /// rad/µs
    pub hamiltonian: Operator,
    /// Each carries its √rate.
    pub loss_ops: Vec<Operator>,
    /// Sample times in µs, strictly increasing, first ≥ 0. The initial state sits at t = 0.
    pub t_grid: Vec<f64>,
    pub observables: Vec<(String, Operator)>,
    pub tolerances: Tolerances,
}

impl EvolutionSpec {
    pub fn new(hamiltonian: Operator, loss_ops: Vec<Operator>, t_grid: Vec<f64>) -> Self {
        Self { hamiltonian, loss_ops, t_grid, observables: Vec::new(), tolerances: Tolerances::default() }
    }

    pub fn observe(mut self, name: impl Into<String>, op: Operator) -> Self {
        self.observables.push((name.into(), op));
        self
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tolerances = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate()?;
        let sig = self.hamiltonian.sig();
        for l in &self.loss_ops {
            sig.ensure_same(l.sig())?;
        }
        for (_, o) in &self.observables {
            sig.ensure_same(o.sig())?;
        }
        match self.t_grid.first() {
            None => return Err(Error::InvalidParameter("empty time grid".into())),
            Some(t) if !(*t >= 0.0) => {
                return Err(Error::InvalidParameter("time grid must start at t >= 0".into()))
            }
            _ => {}
        }
        if self.t_grid.windows(2).any(|w| !(w[1] > w[0])) || self.t_grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("time grid must be finite and strictly increasing".into()));
        }
        Ok(())
    }
}

/// Health figures gathered at the sample times.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct IntegrationStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evals: usize,
    /// Largest |Tr ρ − 1| seen before renormalization.
    pub max_trace_drift: f64,
    pub max_hermitian_deviation: f64,
    /// Smallest sampled eigenvalue (`+inf` if never checked).
    pub min_eigenvalue: f64,
}

/// Observables sampled on the time grid.
#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub columns: Vec<(String, Vec<C64>)>,
    pub final_state: DensityMatrix,
    pub stats: IntegrationStats,
}

impl TimeSeries {
    pub fn column(&self, name: &str) -> Option<&[C64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn real(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name).map(|c| c.iter().map(|z| z.re).collect())
    }

    /// `t,<name>_re,<name>_im,...` with 17 significant digits.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        write!(w, "t")?;
        for (name, _) in &self.columns {
            write!(w, ",{name}_re,{name}_im")?;
        }
        writeln!(w)?;
        for (i, t) in self.times.iter().enumerate() {
            write!(w, "{t:.16e}")?;
            for (_, col) in &self.columns {
                write!(w, ",{:.16e},{:.16e}", col[i].re, col[i].im)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn flat(rho: &DensityMatrix) -> Vec<C64> {
    rho.data().iter().copied().collect()
}

fn hermitian_dev_flat(y: &[C64], n: usize) -> f64 {
    let mut m = 0.0f64;
    for i in 0..n {
        for j in i..n {
            m = m.max((y[i * n + j] - y[j * n + i].conj()).norm());
        }
    }
    m
}

fn to_density(sig: &SpaceSig, y: &[C64]) -> DensityMatrix {
    let n = sig.total_dim();
    let data = Array2::from_shape_vec((n, n), y.to_vec()).expect("square");
    DensityMatrix::from_matrix_unchecked(sig.clone(), data).expect("shape checked")
}

/// Integrates from ρ(0) = `rho0` and samples the observables at every grid time.
pub fn evolve(spec: &EvolutionSpec, rho0: &DensityMatrix) -> Result<TimeSeries> {
    evolve_until(spec, rho0, |_, _| false)
}

/// Like [`evolve`], but `stop(t, values)` is consulted after each sample and may
/// end the run early; the series is then truncated at that sample.
pub fn evolve_until(
    spec: &EvolutionSpec,
    rho0: &DensityMatrix,
    mut stop: impl FnMut(f64, &[C64]) -> bool,
) -> Result<TimeSeries> {
    spec.validate()?;
    spec.hamiltonian.sig().ensure_same(rho0.sig())?;
    let liou = Liouvillian::new(&spec.hamiltonian, &spec.loss_ops)?;
    let tol = spec.tolerances;
    let sig = rho0.sig().clone();
    let n = sig.total_dim();
    let obs: Vec<Csr> = spec.observables.iter().map(|(_, o)| Csr::from_dense(o.data())).collect();

    let mut integ = Dopri::new(&liou, flat(rho0), tol.rel_step_tol, tol.herm_resym_period);
    let mut times = Vec::with_capacity(spec.t_grid.len());
    let mut cols: Vec<Vec<C64>> = vec![Vec::with_capacity(spec.t_grid.len()); obs.len()];
    let mut stats = IntegrationStats { min_eigenvalue: f64::INFINITY, ..Default::default() };
    let mut row = vec![C64::new(0.0, 0.0); obs.len()];

    for (k, &tg) in spec.t_grid.iter().enumerate() {
        integ.advance_to(tg, |_| false)?;
        let drift = integ.renormalize();
        stats.max_trace_drift = stats.max_trace_drift.max(drift);
        if drift > tol.trace_tol {
            return Err(Error::TraceDrift { drift, tol: tol.trace_tol, t: tg });
        }
        let hdev = hermitian_dev_flat(&integ.y, n);
        stats.max_hermitian_deviation = stats.max_hermitian_deviation.max(hdev);
        if hdev > HERMITICITY_CEILING {
            return Err(Error::InvalidState(format!("hermiticity deviation {hdev:e} at t = {tg}")));
        }
        if tol.positivity_every > 0 && k % tol.positivity_every == 0 {
            let ev = to_density(&sig, &integ.y).min_eigenvalue();
            stats.min_eigenvalue = stats.min_eigenvalue.min(ev);
            if ev < POSITIVITY_FLOOR {
                return Err(Error::NegativeEigenvalue { value: ev, t: tg });
            }
        }
        for (r, o) in row.iter_mut().zip(&obs) {
            *r = o.trace_with(&integ.y);
        }
        times.push(tg);
        for (c, r) in cols.iter_mut().zip(&row) {
            c.push(*r);
        }
        if stop(tg, &row) {
            break;
        }
    }
    stats.accepted_steps = integ.accepted;
    stats.rejected_steps = integ.rejected;
    stats.rhs_evals = integ.rhs_evals;
    let columns = spec.observables.iter().map(|(name, _)| name.clone()).zip(cols).collect();
    Ok(TimeSeries { times, columns, final_state: to_density(&sig, &integ.y), stats })
}

/// Outcome of [`relax_to_steady`].
#[derive(Clone, Debug)]
pub struct SteadyState {
    pub state: DensityMatrix,
    /// `‖dρ/dt‖_∞ < stall_tol` was reached before the horizon.
    pub converged: bool,
    /// Time at which integration stopped (µs).
    pub t: f64,
    /// ‖dρ/dt‖_∞ at the returned state.
    pub residual: f64,
}

/// Integrates until ‖dρ/dt‖_∞ < `stall_tol` or `horizon` is reached.
pub fn relax_to_steady(
    hamiltonian: &Operator,
    loss_ops: &[Operator],
    rho0: &DensityMatrix,
    horizon: f64,
    stall_tol: f64,
    tol: Tolerances,
) -> Result<SteadyState> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    tol.validate()?;
    hamiltonian.sig().ensure_same(rho0.sig())?;
    let liou = Liouvillian::new(hamiltonian, loss_ops)?;
    let sig = rho0.sig().clone();
    let mut integ = Dopri::new(&liou, flat(rho0), tol.rel_step_tol, tol.herm_resym_period);
    let residual = |d: &Dopri| d.derivative().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let r0 = residual(&integ);
    if r0 < stall_tol {
        return Ok(SteadyState { state: rho0.clone(), converged: true, t: 0.0, residual: r0 });
    }
    let mut converged = false;
    let mut t_start = 0.0;
    // renormalize between chunks so tiny trace drift cannot accumulate
    let chunk = horizon / 64.0;
    while !converged && t_start < horizon {
        let t_end = (t_start + chunk).min(horizon);
        converged = integ.advance_to(t_end, |d| residual(d) < stall_tol)?;
        let drift = integ.renormalize();
        if drift > tol.trace_tol {
            return Err(Error::TraceDrift { drift, tol: tol.trace_tol, t: integ.t });
        }
        t_start = integ.t;
    }
    integ.resymmetrize();
    let r = residual(&integ);
    Ok(SteadyState { state: to_density(&sig, &integ.y), converged, t: integ.t, residual: r })
}

/// Largest Hilbert dimension accepted by [`steady_state`]; the dense
/// superoperator has dim⁴ entries.
pub const DIRECT_STEADY_MAX_DIM: usize = 48;

/// The unique steady state from a direct solve of 𝓛 vec(ρ) = 0 with one
/// population equation replaced by Tr ρ = 1.
pub fn steady_state(hamiltonian: &Operator, loss_ops: &[Operator]) -> Result<DensityMatrix> {
    let sig = hamiltonian.sig().clone();
    let n = sig.total_dim();
    if n > DIRECT_STEADY_MAX_DIM {
        return Err(Error::Unsupported(format!(
            "direct steady state limited to dimension {DIRECT_STEADY_MAX_DIM}, got {n}"
        )));
    }
    let dev = hamiltonian.hermitian_deviation();
    if dev > 1e-12 * hamiltonian.max_abs().max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    let zero = C64::new(0.0, 0.0);
    let mut heff = hamiltonian.data().mapv(|z| z * C64::new(0.0, -1.0));
    for l in loss_ops {
        sig.ensure_same(l.sig())?;
        let ldl = l.dagger().data().dot(l.data());
        heff.scaled_add(C64::new(-0.5, 0.0), &ldl);
    }
    // row-major vec: vec(AρB) = (A ⊗ Bᵀ) vec(ρ); K = −iH − ½ΣL†L
    let nn = n * n;
    let mut sup = nalgebra::DMatrix::<C64>::from_element(nn, nn, zero);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                // K ρ: (K ⊗ I)
                sup[(row, k * n + j)] += heff[[i, k]];
                // ρ K†: (I ⊗ K̄)
                sup[(row, i * n + k)] += heff[[j, k]].conj();
            }
        }
    }
    for l in loss_ops {
        let d = l.data();
        for i in 0..n {
            for k in 0..n {
                let a = d[[i, k]];
                if a == zero {
                    continue;
                }
                for j in 0..n {
                    for m in 0..n {
                        let b = d[[j, m]];
                        if b != zero {
                            sup[(i * n + j, k * n + m)] += a * b.conj();
                        }
                    }
                }
            }
        }
    }
    for c in 0..nn {
        sup[(0, c)] = zero;
    }
    for i in 0..n {
        sup[(0, i * n + i)] = C64::new(1.0, 0.0);
    }
    let mut rhs = nalgebra::DVector::<C64>::from_element(nn, zero);
    rhs[0] = C64::new(1.0, 0.0);
    let x = sup
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidState("steady state is not unique (singular generator)".into()))?;
    let data = Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (x[i * n + j] + x[j * n + i].conj()));
    let rho = DensityMatrix::from_matrix_unchecked(sig, data)?;
    if !rho.data().iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidState("steady state is not unique (singular generator)".into()));
    }
    Ok(rho)
}
