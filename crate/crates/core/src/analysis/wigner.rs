//! Phase-space quasi-probabilities of a single mode and the two-lobe cat fit.

use std::f64::consts::{FRAC_2_PI, PI};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use super::fit::{levenberg_marquardt, FitFlag, FitResult, LmOptions};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hilbert::{embed, DensityMatrix, Operator, SpaceSig};

/// W(β) sampled on a grid, flattened like [`Grid`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WignerMap {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl WignerMap {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.ny + j]
    }

    /// Σ W ΔxΔy; close to 1 when the grid holds the state.
    pub fn riemann_sum(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx() * self.grid.dy()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Header `x,y,W`, one row per grid point.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "x,y,W")?;
        for ((x, y), v) in self.grid.points().zip(&self.values) {
            writeln!(w, "{x:.16e},{y:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

/// Widest phase-space radius a grid may reach for an `n`-level mode. States
/// in the truncated space have Wigner functions decaying beyond radius √n,
/// so past 2√n the grid samples nothing but e^{−2n}-small tails.
pub fn wigner_max_radius(n: usize) -> f64 {
    2.0 * (n as f64).sqrt()
}

/// ⟨m|D(γ)|n⟩ for m, n < dim, filled row by row from
/// √(m+1) d_{m+1,n} = γ d_{m,n} + √n d_{m,n−1} with d_{0,0} = e^{−|γ|²/2}
/// and d_{0,n+1} = −γ* d_{0,n}/√(n+1). These are the closed-form
/// associated-Laguerre elements, evaluated without factorials.
fn displacement_elements(gamma: C64, dim: usize, sq: &[f64], out: &mut [C64]) {
    out[0] = C64::new((-0.5 * gamma.norm_sqr()).exp(), 0.0);
    for n in 1..dim {
        out[n] = -gamma.conj() * out[n - 1] / sq[n];
    }
    for m in 0..dim - 1 {
        let (cur, next) = out[m * dim..(m + 2) * dim].split_at_mut(dim);
        next[0] = gamma * cur[0] / sq[m + 1];
        for n in 1..dim {
            next[n] = (gamma * cur[n] + sq[n] * cur[n - 1]) / sq[m + 1];
        }
    }
}

fn check_single_mode(rho: &DensityMatrix) -> Result<usize> {
    if rho.sig().n_modes() != 1 {
        return Err(Error::InvalidParameter(
            "Wigner maps need a single-mode state; reduce it with partial_trace_keep first".into(),
        ));
    }
    Ok(rho.sig().total_dim())
}

fn check_extent(n: usize, grid: &Grid) -> Result<()> {
    grid.validate()?;
    let r = [grid.x_min, grid.x_max]
        .iter()
        .flat_map(|x| [grid.y_min, grid.y_max].map(|y| x.hypot(y)))
        .fold(0.0, f64::max);
    if r > wigner_max_radius(n) {
        return Err(Error::TruncationTooSmall {
            have: n,
            need: (r / 2.0).powi(2).ceil() as usize,
            context: format!("Wigner grid reaching |beta| = {r:.3}"),
        });
    }
    Ok(())
}

/// W(β) = (2/π) Tr[D†(β) ρ D(β) P] at one point, from
/// Tr[ρ D(2β) P] = Σ ρ_{nm} (−1)ⁿ ⟨m|D(2β)|n⟩.
fn wigner_point(rho: &Array2<C64>, beta: C64, sq: &[f64], buf: &mut [C64]) -> f64 {
    let n = rho.nrows();
    displacement_elements(2.0 * beta, n, sq, buf);
    let mut acc = 0.0;
    for k in 0..n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for m in 0..n {
            acc += sign * (rho[[k, m]] * buf[m * n + k]).re;
        }
    }
    FRAC_2_PI * acc
}

/// W(β) = (2/π) Tr[D†(β) ρ D(β) P] on every grid point, so that a coherent
/// state |β₀⟩ peaks at β = β₀ with value 2/π.
pub fn wigner(rho: &DensityMatrix, grid: &Grid) -> Result<WignerMap> {
    let n = check_single_mode(rho)?;
    check_extent(n, grid)?;
    let sq: Vec<f64> = (0..=n).map(|k| (k as f64).sqrt()).collect();
    let data = rho.data();
    let values = (0..grid.len())
        .into_par_iter()
        .map_init(
            || vec![C64::new(0.0, 0.0); n * n],
            |buf, k| {
                let (x, y) = grid.point(k);
                wigner_point(data, C64::new(x, y), &sq, buf)
            },
        )
        .collect();
    Ok(WignerMap { grid: grid.clone(), values })
}

/// W at a single point.
pub fn wigner_at(rho: &DensityMatrix, beta: C64) -> Result<f64> {
    let n = check_single_mode(rho)?;
    let sq: Vec<f64> = (0..=n).map(|k| (k as f64).sqrt()).collect();
    let mut buf = vec![C64::new(0.0, 0.0); n * n];
    Ok(wigner_point(rho.data(), beta, &sq, &mut buf))
}

/// Π = (1/π) ∫_{Re β > 0} |β⟩⟨β| d²β on an `n`-level mode, so Tr[ρΠ] is the
/// Husimi-Q mass of the right half-plane. In polar form
/// ⟨m|Π|k⟩ = Γ((m+k)/2 + 1) A(m−k) / (2π√(m!k!)) with A(0) = π and
/// A(d) = 2 sin(dπ/2)/d.
pub fn husimi_right_half_plane(n: usize) -> Array2<C64> {
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..n).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    // ln Γ(h/2 + 1) for h = 0..2n
    let mut ln_gamma_half = vec![0.0; 2 * n];
    if 2 * n > 1 {
        ln_gamma_half[1] = (PI.sqrt() / 2.0).ln();
    }
    for h in 2..2 * n {
        ln_gamma_half[h] = ln_gamma_half[h - 2] + (h as f64 / 2.0).ln();
    }
    Array2::from_shape_fn((n, n), |(m, k)| {
        let d = m as i64 - k as i64;
        let angular = if d == 0 {
            PI
        } else if d % 2 == 0 {
            0.0
        } else {
            let sign = if (d.abs() - 1) / 2 % 2 == 0 { 1.0 } else { -1.0 };
            2.0 * sign / d.abs() as f64
        };
        if angular == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let mag = (ln_gamma_half[m + k] - 0.5 * (ln_fact[m] + ln_fact[k])).exp();
        C64::new(mag * angular / (2.0 * PI), 0.0)
    })
}

/// 2Π − 1 on `mode`: right minus left half-plane Husimi mass.
pub fn husimi_imbalance(sig: &SpaceSig, mode: usize) -> Result<Operator> {
    sig.check_mode(mode)?;
    let n = sig.dims()[mode];
    let local = husimi_right_half_plane(n) * C64::new(2.0, 0.0) - Array2::<C64>::eye(n);
    embed(sig, mode, &local)
}

struct Lobes {
    x0: f64,
    y0: f64,
    width: f64,
    a1: f64,
    a2: f64,
    background: f64,
}

impl Lobes {
    fn from(p: &[f64]) -> Self {
        Self { x0: p[0], y0: p[1], width: p[2], a1: p[3], a2: p[4], background: p[5] }
    }
}

const CAT_FIT_NAMES: [&str; 6] = ["x0", "y0", "width", "amp_plus", "amp_minus", "background"];

/// Fits A₁g(β − β₀) + A₂g(β + β₀) + B with isotropic Gaussians
/// g(r) = e^{−|r|²/(2σ²)} and reports |α_∞|² = x₀² + y₀².
///
/// The starting centre is √⟨β²⟩ from the map's second moment, which the
/// interference fringes of a cat do not bias. Maps whose moment or fitted
/// separation cannot resolve two lobes are flagged [`FitFlag::SingleLobe`]
/// with |α_∞|² = 0.
pub fn fit_cat_size(map: &WignerMap) -> Result<FitResult> {
    map.grid.validate()?;
    let pts: Vec<(f64, f64)> = map.grid.points().collect();
    let mass: f64 = map.values.iter().sum();
    if !(mass.abs() > 0.0) {
        return Err(Error::FitFailed("map has no mass".into()));
    }
    let m2 = pts.iter().zip(&map.values).map(|((x, y), w)| C64::new(*x, *y).powi(2) * *w).sum::<C64>() / mass;
    let single = |initial_rms: f64| FitResult {
        params: vec![("alpha_inf_sq".into(), 0.0)],
        stderr: None,
        residual_rms: initial_rms,
        initial_rms,
        converged: false,
        iterations: 0,
        flag: Some(FitFlag::SingleLobe),
    };
    let sigma0 = 0.5;
    if m2.norm() < sigma0 * sigma0 {
        return Ok(single(0.0));
    }
    let c0 = m2.sqrt();
    let nearest = |x: f64, y: f64| {
        pts.iter()
            .zip(&map.values)
            .min_by(|a, b| {
                let da = (a.0 .0 - x).hypot(a.0 .1 - y);
                let db = (b.0 .0 - x).hypot(b.0 .1 - y);
                da.total_cmp(&db)
            })
            .map(|(_, w)| *w)
            .unwrap_or(0.0)
    };
    let p0 = [c0.re, c0.im, sigma0, nearest(c0.re, c0.im), nearest(-c0.re, -c0.im), 0.0];

    let values = &map.values;
    let outcome = levenberg_marquardt(
        |p| {
            let l = Lobes::from(p);
            if !(l.width > 0.0) {
                return Ok(None);
            }
            let s2 = l.width * l.width;
            let mut r = DVector::zeros(pts.len());
            let mut j = DMatrix::zeros(pts.len(), 6);
            for (k, ((x, y), w)) in pts.iter().zip(values).enumerate() {
                let (ux, uy) = (x - l.x0, y - l.y0);
                let (vx, vy) = (x + l.x0, y + l.y0);
                let (r1, r2) = (ux * ux + uy * uy, vx * vx + vy * vy);
                let g1 = (-r1 / (2.0 * s2)).exp();
                let g2 = (-r2 / (2.0 * s2)).exp();
                r[k] = l.a1 * g1 + l.a2 * g2 + l.background - w;
                j[(k, 0)] = (l.a1 * g1 * ux - l.a2 * g2 * vx) / s2;
                j[(k, 1)] = (l.a1 * g1 * uy - l.a2 * g2 * vy) / s2;
                j[(k, 2)] = (l.a1 * g1 * r1 + l.a2 * g2 * r2) / (s2 * l.width);
                j[(k, 3)] = g1;
                j[(k, 4)] = g2;
                j[(k, 5)] = 1.0;
            }
            Ok(Some((r, j)))
        },
        &p0,
        LmOptions::default(),
    )?;

    let l = Lobes::from(&outcome.params);
    let width = l.width.abs();
    let separation = l.x0.hypot(l.y0);
    if separation < 2.0 * width {
        return Ok(single(outcome.initial_rms()));
    }
    let size = l.x0 * l.x0 + l.y0 * l.y0;
    let mut params: Vec<(String, f64)> =
        CAT_FIT_NAMES.iter().map(|n| n.to_string()).zip(outcome.params.iter().copied()).collect();
    params.push(("alpha_inf_sq".into(), size));
    let stderr = outcome.covariance.as_ref().map(|cov| {
        let mut se: Vec<(String, f64)> =
            CAT_FIT_NAMES.iter().enumerate().map(|(i, n)| (n.to_string(), cov[(i, i)].max(0.0).sqrt())).collect();
        let (gx, gy) = (2.0 * l.x0, 2.0 * l.y0);
        let var = gx * gx * cov[(0, 0)] + 2.0 * gx * gy * cov[(0, 1)] + gy * gy * cov[(1, 1)];
        se.push(("alpha_inf_sq".into(), var.max(0.0).sqrt()));
        se
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
