//! Dormand–Prince 5(4) with first-same-as-last reuse and a PI step controller
//! (Hairer, Nørsett & Wanner, "Solving ODEs I", II.4 and IV.2).

use num_complex::Complex64 as C64;

use super::Liouvillian;
use crate::error::{Error, Result};

// the generator is time independent, so the stage nodes never enter
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - 0.75 * BETA;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

fn max_abs(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) struct Dopri<'a> {
    l: &'a Liouvillian,
    n: usize,
    pub(crate) t: f64,
    pub(crate) y: Vec<C64>,
    k: [Vec<C64>; 7],
    ytmp: Vec<C64>,
    scratch: Vec<C64>,
    h: f64,
    err_old: f64,
    rtol: f64,
    resym_period: usize,
    pub(crate) accepted: usize,
    pub(crate) rejected: usize,
    pub(crate) rhs_evals: usize,
}

impl<'a> Dopri<'a> {
    pub(crate) fn new(l: &'a Liouvillian, y0: Vec<C64>, rtol: f64, resym_period: usize) -> Self {
        let n = l.dim();
        let zeros = || vec![C64::new(0.0, 0.0); n * n];
        let mut s = Self {
            l,
            n,
            t: 0.0,
            y: y0,
            k: std::array::from_fn(|_| zeros()),
            ytmp: zeros(),
            scratch: vec![C64::new(0.0, 0.0); 2 * n * n],
            h: 1e-3 / l.max_rate().max(1e-300),
            err_old: 1e-4,
            rtol,
            resym_period: resym_period.max(1),
            accepted: 0,
            rejected: 0,
            rhs_evals: 0,
        };
        s.refresh_derivative();
        s
    }

    /// dρ/dt at the current state.
    pub(crate) fn derivative(&self) -> &[C64] {
        &self.k[0]
    }

    fn refresh_derivative(&mut self) {
        self.l.rhs_hermitian(&self.y, &mut self.k[0], &mut self.scratch);
        self.rhs_evals += 1;
    }

    /// Replaces ρ by (ρ + ρ†)/2.
    pub(crate) fn resymmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in i..n {
                let a = self.y[i * n + j];
                let b = self.y[j * n + i];
                let m = (a + b.conj()) * 0.5;
                self.y[i * n + j] = m;
                self.y[j * n + i] = m.conj();
            }
        }
        self.refresh_derivative();
    }

    /// Divides ρ (and its cached derivative) by the trace; returns the drift
    /// |Tr ρ − 1| found before rescaling.
    pub(crate) fn renormalize(&mut self) -> f64 {
        let n = self.n;
        let tr: f64 = (0..n).map(|i| self.y[i * n + i].re).sum();
        let inv = 1.0 / tr;
        self.y.iter_mut().for_each(|z| *z *= inv);
        self.k[0].iter_mut().for_each(|z| *z *= inv);
        (tr - 1.0).abs()
    }

    /// Integrates to exactly `t_end`. `on_accept` runs after every accepted
    /// step; returning `true` stops early. Returns whether it stopped early.
    pub(crate) fn advance_to(
        &mut self,
        t_end: f64,
        mut on_accept: impl FnMut(&Self) -> bool,
    ) -> Result<bool> {
        while self.t < t_end {
            let remaining = t_end - self.t;
            let landing = self.h >= remaining;
            let h = if landing { remaining } else { self.h };
            if !(h > 0.0) || self.t + h == self.t {
                return Err(Error::StepUnderflow { t: self.t, h });
            }
            let err = self.trial_step(h);
            if err <= 1.0 {
                let fac11 = err.powf(EXPO);
                let fac = (fac11 / self.err_old.powf(BETA) / SAFETY).clamp(1.0 / MAX_FACTOR, 1.0 / MIN_FACTOR);
                let h_new = h / fac;
                self.err_old = err.max(1e-4);
                self.t = if landing { t_end } else { self.t + h };
                std::mem::swap(&mut self.y, &mut self.ytmp);
                self.k.swap(0, 6);
                self.accepted += 1;
                self.h = if landing { h_new.max(self.h) } else { h_new };
                if self.accepted.is_multiple_of(self.resym_period) {
                    self.resymmetrize();
                }
                if on_accept(self) {
                    return Ok(true);
                }
            } else {
                self.rejected += 1;
                let fac = if err.is_finite() {
                    (err.powf(EXPO) / SAFETY).min(1.0 / MIN_FACTOR)
                } else {
                    1.0 / MIN_FACTOR
                };
                self.h = h / fac.max(1.0);
            }
        }
        Ok(false)
    }

    /// Computes stages 2..7 for step `h`; the fifth-order solution ends up in
    /// `ytmp` and its derivative in `k[6]`. Returns the scaled error norm.
    fn trial_step(&mut self, h: f64) -> f64 {
        let len = self.y.len();
        for s in 1..7 {
            let (done, rest) = self.k.split_at_mut(s);
            for idx in 0..len {
                let mut acc = self.y[idx];
                for (j, kj) in done.iter().enumerate() {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += kj[idx] * (h * a);
                    }
                }
                self.ytmp[idx] = acc;
            }
            self.l.rhs_hermitian(&self.ytmp, &mut rest[0], &mut self.scratch);
            self.rhs_evals += 1;
        }
        let mut err_max = 0.0f64;
        for idx in 0..len {
            let mut e = C64::new(0.0, 0.0);
            for (j, kj) in self.k.iter().enumerate() {
                if E[j] != 0.0 {
                    e += kj[idx] * E[j];
                }
            }
            err_max = err_max.max((e * h).norm());
        }
        let scale = self.rtol * max_abs(&self.y).max(max_abs(&self.ytmp));
        err_max / scale
    }
}
