//! Levenberg–Marquardt least squares and the curve models built on it.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Why a fit result carries no finite estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// The samples do not decay: T is reported as infinite.
    NoDecay,
    /// Only one lobe is resolved: the cat size is reported as 0.
    SingleLobe,
}

/// Named estimates with standard errors (present only when converged).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub params: Vec<(String, f64)>,
    pub stderr: Option<Vec<(String, f64)>>,
    pub residual_rms: f64,
    /// RMS residual at the initial guess.
    pub initial_rms: f64,
    pub converged: bool,
    pub iterations: usize,
    pub flag: Option<FitFlag>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn stderr_of(&self, name: &str) -> Option<f64> {
        self.stderr.as_ref()?.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Like [`get`](Self::get) but a missing name is an error.
    pub fn param(&self, name: &str) -> Result<f64> {
        self.get(name).ok_or_else(|| Error::FitFailed(format!("no parameter `{name}`")))
    }
}

/// Damping schedule and stopping rules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub initial_damping: f64,
    pub damping_factor: f64,
    pub max_iterations: usize,
    /// Stop when a step lowers the cost by less than this fraction.
    pub ftol: f64,
    /// Stop when ‖δ‖ < xtol (‖p‖ + xtol).
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { initial_damping: 1e-3, damping_factor: 10.0, max_iterations: 200, ftol: 1e-15, xtol: 1e-13 }
    }
}

/// Raw solver output.
#[derive(Clone, Debug)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub cost: f64,
    pub initial_cost: f64,
    pub converged: bool,
    pub iterations: usize,
    /// s²(JᵀJ)⁻¹ with s² = ‖r‖²/(m − p), when converged and m > p.
    pub covariance: Option<DMatrix<f64>>,
    pub n_residuals: usize,
}

impl LmOutcome {
    pub fn rms(&self) -> f64 {
        (self.cost / self.n_residuals as f64).sqrt()
    }

    pub fn initial_rms(&self) -> f64 {
        (self.initial_cost / self.n_residuals as f64).sqrt()
    }

    pub fn stderr(&self) -> Option<Vec<f64>> {
        let c = self.covariance.as_ref()?;
        Some((0..c.nrows()).map(|i| c[(i, i)].max(0.0).sqrt()).collect())
    }
}

/// Residuals r(p) = model − data and their Jacobian ∂r/∂p (m × p).
pub type Evaluation = (DVector<f64>, DMatrix<f64>);

/// Minimizes ‖r(p)‖² from `p0`. `eval` may reject a trial point by
/// returning `Ok(None)`; the step is then treated as a failed one.
pub fn levenberg_marquardt(
    mut eval: impl FnMut(&[f64]) -> Result<Option<Evaluation>>,
    p0: &[f64],
    opts: LmOptions,
) -> Result<LmOutcome> {
    let np = p0.len();
    let (mut r, mut j) =
        eval(p0)?.ok_or_else(|| Error::FitFailed("initial guess outside the model domain".into()))?;
    let m = r.len();
    if m < np {
        return Err(Error::FitFailed(format!("{m} residuals for {np} parameters")));
    }
    let mut p = DVector::from_column_slice(p0);
    let mut cost = r.norm_squared();
    let initial_cost = cost;
    let mut lambda = opts.initial_damping;
    let mut converged = cost == 0.0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if g.amax() <= f64::EPSILON * cost.sqrt() * j.amax() {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..np {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= opts.damping_factor;
                continue;
            };
            let trial = &p + &delta;
            match eval(trial.as_slice())? {
                Some((r_new, j_new)) if r_new.norm_squared() < cost => {
                    let new_cost = r_new.norm_squared();
                    let small_gain = cost - new_cost <= opts.ftol * cost;
                    let small_step = delta.norm() <= opts.xtol * (p.norm() + opts.xtol);
                    p = trial;
                    r = r_new;
                    j = j_new;
                    cost = new_cost;
                    lambda = (lambda / opts.damping_factor).max(1e-300);
                    converged = small_gain || small_step || cost == 0.0;
                    accepted = true;
                    break;
                }
                _ => lambda *= opts.damping_factor,
            }
        }
        if !accepted {
            // no downhill step exists at any damping: a local minimum to rounding
            converged = true;
        }
    }

    let covariance = if converged && m > np {
        let s2 = cost / (m - np) as f64;
        (j.transpose() * &j).try_inverse().map(|inv| inv * s2)
    } else {
        None
    };
    Ok(LmOutcome { params: p.iter().copied().collect(), cost, initial_cost, converged, iterations, covariance, n_residuals: m })
}

/// How the asymptote C of A·e^{−t/T} + C is treated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Offset {
    Free,
    Fixed(f64),
}

fn validate_series(ts: &[f64], ys: &[f64]) -> Result<()> {
    if ts.len() != ys.len() {
        return Err(Error::InvalidParameter(format!("{} times for {} samples", ts.len(), ys.len())));
    }
    if ts.len() < 5 {
        return Err(Error::InvalidParameter("at least 5 samples are required".into()));
    }
    if ts.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("samples must be finite".into()));
    }
    Ok(())
}

/// Ordinary least squares through `(x, y)`; returns (slope, intercept, stderrs).
fn ols(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64, f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let s2 = if xs.len() > 2 { ssr / (n - 2.0) } else { 0.0 };
    let se_slope = (s2 / sxx).sqrt();
    let se_int = (s2 * (1.0 / n + mx * mx / sxx)).sqrt();
    Some((slope, intercept, se_slope, se_int, (ssr / n).sqrt()))
}

/// y = slope·x + intercept by ordinary least squares.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter("a line needs at least two matching samples".into()));
    }
    let (slope, intercept, se_s, se_i, rms) =
        ols(xs, ys).ok_or_else(|| Error::FitFailed("abscissae are all equal".into()))?;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let initial_rms = (ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / ys.len() as f64).sqrt();
    Ok(FitResult {
        params: vec![("slope".into(), slope), ("intercept".into(), intercept)],
        stderr: Some(vec![("slope".into(), se_s), ("intercept".into(), se_i)]),
        residual_rms: rms,
        initial_rms,
        converged: true,
        iterations: 0,
        flag: None,
    })
}

/// Fits A·e^{−t/T} + C by Levenberg–Marquardt with an analytic Jacobian.
///
/// The decay is parametrized by γ = 1/T internally. The initial guess comes
/// from a log-linear regression of |y − tail| against t, with the tail taken
/// as the mean of the last tenth of the samples (or the fixed offset).
/// Samples with no measurable variation give T = ∞ with [`FitFlag::NoDecay`].
pub fn fit_exp_decay(ts: &[f64], ys: &[f64], offset: Offset) -> Result<FitResult> {
    validate_series(ts, ys)?;
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &y| (l.min(y), h.max(y)));
    let scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let names = match offset {
        Offset::Free => vec!["A", "T", "C"],
        Offset::Fixed(_) => vec!["A", "T"],
    };
    let flat = match offset {
        Offset::Free => hi - lo <= 1e-12 * scale.max(f64::MIN_POSITIVE),
        Offset::Fixed(c) => ys.iter().all(|y| (y - c).abs() <= 1e-300),
    };
    if flat {
        let last = ys[ys.len() - 1];
        let mut params = vec![("A".to_string(), 0.0), ("T".to_string(), f64::INFINITY)];
        if offset == Offset::Free {
            params.push(("C".into(), last));
        }
        return Ok(FitResult {
            params,
            stderr: None,
            residual_rms: 0.0,
            initial_rms: 0.0,
            converged: false,
            iterations: 0,
            flag: Some(FitFlag::NoDecay),
        });
    }

    let tail = match offset {
        Offset::Free => {
            let k = (ys.len() / 10).max(1);
            ys[ys.len() - k..].iter().sum::<f64>() / k as f64
        }
        Offset::Fixed(c) => c,
    };
    let t0 = ts[0];
    let span = ts[ts.len() - 1] - t0;
    if !(span > 0.0) {
        return Err(Error::InvalidParameter("sample times must span a positive interval".into()));
    }
    let z0 = ys[0] - tail;
    let zmax = ys.iter().fold(0.0f64, |m, y| m.max((y - tail).abs()));
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (t, y) in ts.iter().zip(ys) {
        let z = y - tail;
        if z * z0 > 0.0 && z.abs() > 0.05 * zmax {
            lx.push(t - t0);
            ly.push(z.abs().ln());
        }
    }
    let (mut gamma0, mut a0) = (1.0 / span, z0);
    if lx.len() >= 2 {
        if let Some((slope, intercept, ..)) = ols(&lx, &ly) {
            if slope < 0.0 {
                gamma0 = -slope;
                a0 = z0.signum() * intercept.exp();
            }
        }
    }
    let fixed_c = match offset {
        Offset::Fixed(c) => Some(c),
        Offset::Free => None,
    };
    let mut p0 = vec![a0, gamma0];
    if fixed_c.is_none() {
        p0.push(tail);
    }

    let np = p0.len();
    let outcome = levenberg_marquardt(
        |p| {
            let (a, g) = (p[0], p[1]);
            let c = fixed_c.unwrap_or_else(|| p[2]);
            let mut r = DVector::zeros(ts.len());
            let mut j = DMatrix::zeros(ts.len(), np);
            for (k, (t, y)) in ts.iter().zip(ys).enumerate() {
                let dt = t - t0;
                let e = (-g * dt).exp();
                if !e.is_finite() {
                    return Ok(None);
                }
                r[k] = a * e + c - y;
                j[(k, 0)] = e;
                j[(k, 1)] = -a * dt * e;
                if np == 3 {
                    j[(k, 2)] = 1.0;
                }
            }
            Ok(Some((r, j)))
        },
        &p0,
        LmOptions::default(),
    )?;

    let gamma = outcome.params[1];
    if outcome.converged && !(gamma > 0.0) {
        return Err(Error::FitFailed(format!("non-positive decay rate {gamma:e} (T <= 0)")));
    }
    // A is quoted at the first sample time
    let t_decay = 1.0 / gamma;
    let mut params = vec![("A".to_string(), outcome.params[0]), ("T".to_string(), t_decay)];
    if np == 3 {
        params.push(("C".into(), outcome.params[2]));
    }
    let stderr = outcome.stderr().map(|se| {
        names
            .iter()
            .zip(&se)
            .map(|(n, s)| {
                let v = if *n == "T" { s / (gamma * gamma) } else { *s };
                (n.to_string(), v)
            })
            .collect()
    });
    Ok(FitResult {
        params,
        stderr,
        residual_rms: outcome.rms(),
        initial_rms: outcome.initial_rms(),
        converged: outcome.converged,
        iterations: outcome.iterations,
        flag: None,
    })
}

/// Forward model for [`fit_exp_decay`] results, for generate-and-refit checks.
pub fn exp_decay_model(fit: &FitResult, t0: f64, ts: &[f64]) -> Result<Vec<f64>> {
    let a = fit.param("A")?;
    let t_decay = fit.param("T")?;
    let c = fit.get("C").unwrap_or(0.0);
    Ok(ts.iter().map(|t| a * (-(t - t0) / t_decay).exp() + c).collect())
}
