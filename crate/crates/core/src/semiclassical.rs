//! Coherent-state phase-space flow under two-photon confinement.
//!
//! A coherent state |β⟩ with β = x + iy moves as
//! dβ/dt = −κ₂β*(β² − α²) − ½κ_a β − iΔβ. Rates share one unit (typically
//! rad/µs); α is real.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldParams {
    pub kappa2: f64,
    pub alpha: f64,
    #[serde(default)]
    pub kappa_a: f64,
    #[serde(default)]
    pub delta: f64,
}

impl FieldParams {
    pub fn new(kappa2: f64, alpha: f64) -> Result<Self> {
        let fp = Self { kappa2, alpha, kappa_a: 0.0, delta: 0.0 };
        fp.validate()?;
        Ok(fp)
    }

    pub fn with_loss(self, kappa_a: f64) -> Self {
        Self { kappa_a, ..self }
    }

    pub fn with_detuning(self, delta: f64) -> Self {
        Self { delta, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa2 > 0.0) || !self.kappa2.is_finite() {
            return Err(Error::InvalidParameter("kappa2 must be positive".into()));
        }
        if !self.alpha.is_finite() || !self.delta.is_finite() {
            return Err(Error::InvalidParameter("alpha and delta must be finite".into()));
        }
        if !(self.kappa_a >= 0.0) || !self.kappa_a.is_finite() {
            return Err(Error::InvalidParameter("kappa_a must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// κ_c = 2α²κ₂.
    pub fn kappa_c(&self) -> f64 {
        2.0 * self.alpha * self.alpha * self.kappa2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
}

impl PhasePoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// (dx/dt, dy/dt).
pub fn velocity(p: PhasePoint, fp: &FieldParams) -> (f64, f64) {
    let (x, y) = (p.x, p.y);
    let r2 = x * x + y * y;
    let a2 = fp.alpha * fp.alpha;
    let vx = -fp.kappa2 * (x * r2 - x * a2) - 0.5 * fp.kappa_a * x + fp.delta * y;
    let vy = -fp.kappa2 * (y * r2 + y * a2) - 0.5 * fp.kappa_a * y - fp.delta * x;
    (vx, vy)
}

/// Analytic Jacobian `[[∂vx/∂x, ∂vx/∂y], [∂vy/∂x, ∂vy/∂y]]`.
pub fn jacobian(p: PhasePoint, fp: &FieldParams) -> [[f64; 2]; 2] {
    let (x, y) = (p.x, p.y);
    let a2 = fp.alpha * fp.alpha;
    let k = fp.kappa2;
    let half = 0.5 * fp.kappa_a;
    [
        [-k * (3.0 * x * x + y * y - a2) - half, -2.0 * k * x * y + fp.delta],
        [-2.0 * k * x * y - fp.delta, -k * (3.0 * y * y + x * x + a2) - half],
    ]
}

/// ∂v_y/∂x − ∂v_x/∂y by central differences with step `h`.
pub fn curl(p: PhasePoint, fp: &FieldParams, h: f64) -> f64 {
    let at = |dx: f64, dy: f64| velocity(PhasePoint::new(p.x + dx, p.y + dy), fp);
    let dvy_dx = (at(h, 0.0).1 - at(-h, 0.0).1) / (2.0 * h);
    let dvx_dy = (at(0.0, h).0 - at(0.0, -h).0) / (2.0 * h);
    dvy_dx - dvx_dy
}

fn require_irrotational(fp: &FieldParams) -> Result<()> {
    if fp.delta != 0.0 {
        return Err(Error::Unsupported("the field is rotational when delta != 0; no scalar potential exists".into()));
    }
    Ok(())
}

/// V with −∇V equal to [`velocity`]:
/// κ₂(¼(x⁴ + y⁴) + ½x²y² − ½α²(x² − y²)) + ¼κ_a(x² + y²).
pub fn pseudo_potential(p: PhasePoint, fp: &FieldParams) -> Result<f64> {
    require_irrotational(fp)?;
    let (x2, y2) = (p.x * p.x, p.y * p.y);
    let a2 = fp.alpha * fp.alpha;
    let quartic = 0.25 * (x2 * x2 + y2 * y2) + 0.5 * x2 * y2 - 0.5 * a2 * (x2 - y2);
    Ok(fp.kappa2 * quartic + 0.25 * fp.kappa_a * (x2 + y2))
}

/// Analytic ∇V.
pub fn potential_gradient(p: PhasePoint, fp: &FieldParams) -> Result<(f64, f64)> {
    require_irrotational(fp)?;
    let (vx, vy) = velocity(p, fp);
    Ok((-vx, -vy))
}

/// Slope λ of the line y = λx along which the detuned flow is integrable:
/// the root of λ²Δ + κ_cλ + Δ = 0 that vanishes as Δ → 0, evaluated in the
/// cancellation-free form −Δ / (κ_c/2 + √((κ_c/2)² − Δ²)).
pub fn lambda_direction(kappa_c: f64, delta: f64) -> Result<f64> {
    let half = 0.5 * kappa_c;
    if !(half >= 0.0) || !delta.is_finite() || delta.abs() > half {
        return Err(Error::NoMetastableDirection { delta, half_kappa_c: half });
    }
    if delta == 0.0 {
        return Ok(0.0);
    }
    Ok(-delta / (half + (half * half - delta * delta).sqrt()))
}

/// Potential along the cut y = λx, with β′ the signed distance from the
/// origin: −½√((κ_c/2)² − Δ²)β′² + ¼κ₂β′⁴.
pub fn detuned_cut_potential(beta_prime: f64, fp: &FieldParams) -> Result<f64> {
    if fp.kappa_a != 0.0 {
        return Err(Error::Unsupported("cut potential with both loss and detuning".into()));
    }
    let half = 0.5 * fp.kappa_c();
    lambda_direction(fp.kappa_c(), fp.delta)?;
    let depth = (half * half - fp.delta * fp.delta).sqrt();
    let b2 = beta_prime * beta_prime;
    Ok(-0.5 * depth * b2 + 0.25 * fp.kappa2 * b2 * b2)
}

/// |α_∞|, the distance of the metastable wells from the origin.
///
/// Loss only: √(α² − κ_a/(2κ₂)), or 0 past threshold. Detuning only:
/// (α⁴ − (Δ/κ₂)²)^¼, or 0 once |Δ| ≥ κ₂α². Both at once is rejected.
pub fn metastable_amplitude(fp: &FieldParams) -> Result<f64> {
    fp.validate()?;
    let a2 = fp.alpha * fp.alpha;
    match (fp.kappa_a != 0.0, fp.delta != 0.0) {
        (true, true) => Err(Error::Unsupported("combined single-photon loss and detuning".into())),
        (true, false) => {
            let shifted = a2 - fp.kappa_a / (2.0 * fp.kappa2);
            Ok(if shifted > 0.0 { shifted.sqrt() } else { 0.0 })
        }
        (false, true) => {
            let r = fp.delta.abs() / fp.kappa2;
            Ok(if r < a2 { ((a2 - r) * (a2 + r)).sqrt().sqrt() } else { 0.0 })
        }
        (false, false) => Ok(fp.alpha.abs()),
    }
}

/// Newton iteration on v = 0 from `seed`; `None` if it does not settle.
pub fn find_fixed_point(seed: PhasePoint, fp: &FieldParams) -> Option<PhasePoint> {
    let scale = fp.kappa2 * (1.0 + fp.alpha * fp.alpha).powf(1.5) + fp.kappa_a + fp.delta.abs();
    let mut p = seed;
    for _ in 0..100 {
        let (vx, vy) = velocity(p, fp);
        let j = jacobian(p, fp);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = (j[1][1] * vx - j[0][1] * vy) / det;
        let dy = (j[0][0] * vy - j[1][0] * vx) / det;
        p = PhasePoint::new(p.x - dx, p.y - dy);
        if dx.hypot(dy) < 1e-14 * (1.0 + p.norm()) {
            break;
        }
    }
    let (vx, vy) = velocity(p, fp);
    (vx.hypot(vy) < 1e-12 * scale).then_some(p)
}

/// All distinct fixed points reached by Newton from a seed lattice covering
/// |β| ≤ 2(|α| + 1), sorted by x then y.
pub fn fixed_points(fp: &FieldParams) -> Vec<PhasePoint> {
    let reach = 2.0 * (fp.alpha.abs() + 1.0);
    let n = 9;
    let mut found: Vec<PhasePoint> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let seed = PhasePoint::new(
                -reach + 2.0 * reach * i as f64 / (n - 1) as f64,
                -reach + 2.0 * reach * j as f64 / (n - 1) as f64,
            );
            if let Some(p) = find_fixed_point(seed, fp) {
                let dup = found.iter().any(|q| (q.x - p.x).hypot(q.y - p.y) < 1e-7 * (1.0 + p.norm()));
                if !dup {
                    found.push(p);
                }
            }
        }
    }
    found.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    found
}

/// Sampled velocity field, speed and (for Δ = 0) potential.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    pub grid: Grid,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub speed: Vec<f64>,
    pub potential: Option<Vec<f64>>,
}

impl FieldGrid {
    /// Header `x,y,vx,vy,speed[,V]`, one row per grid point.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        if self.potential.is_some() {
            writeln!(w, "x,y,vx,vy,speed,V")?;
        } else {
            writeln!(w, "x,y,vx,vy,speed")?;
        }
        for (k, (x, y)) in self.grid.points().enumerate() {
            write!(w, "{x:.16e},{y:.16e},{:.16e},{:.16e},{:.16e}", self.vx[k], self.vy[k], self.speed[k])?;
            if let Some(v) = &self.potential {
                write!(w, ",{:.16e}", v[k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Samples the field at every point of `grid`.
pub fn grid_export(fp: &FieldParams, grid: &Grid) -> Result<FieldGrid> {
    fp.validate()?;
    grid.validate()?;
    let n = grid.len();
    let (mut vx, mut vy, mut speed) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut potential = (fp.delta == 0.0).then(|| Vec::with_capacity(n));
    for (x, y) in grid.points() {
        let p = PhasePoint::new(x, y);
        let (u, v) = velocity(p, fp);
        vx.push(u);
        vy.push(v);
        speed.push(u.hypot(v));
        if let Some(pot) = potential.as_mut() {
            pot.push(pseudo_potential(p, fp)?);
        }
    }
    Ok(FieldGrid { grid: grid.clone(), vx, vy, speed, potential })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_is_a_fixed_point() {
        let fp = FieldParams::new(1.3, 2.0).unwrap();
        assert_eq!(velocity(PhasePoint::new(2.0, 0.0), &fp), (0.0, 0.0));
        assert_eq!(velocity(PhasePoint::new(-2.0, 0.0), &fp), (0.0, 0.0));
        assert_eq!(metastable_amplitude(&fp).unwrap(), 2.0);
    }

    #[test]
    fn loss_shifts_the_wells_inward() {
        let fp = FieldParams::new(1.0, 2.0).unwrap().with_loss(1.0);
        let r = 3.5f64.sqrt();
        for x in [r, -r] {
            let (u, v) = velocity(PhasePoint::new(x, 0.0), &fp);
            assert!(u.abs() < 1e-12 && v == 0.0);
        }
        let fp = FieldParams::new(1.0, 2f64.sqrt()).unwrap().with_loss(1.0);
        assert!((metastable_amplitude(&fp).unwrap().powi(2) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn lambda_limits() {
        assert!(lambda_direction(1.0, 1e-300).unwrap().abs() < 1e-299);
        assert_eq!(lambda_direction(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(lambda_direction(1.0, 0.5).unwrap(), -1.0);
        assert!(matches!(lambda_direction(1.0, 0.5000001), Err(Error::NoMetastableDirection { .. })));
    }

    #[test]
    fn potential_needs_an_irrotational_field() {
        let fp = FieldParams::new(1.0, 1.0).unwrap().with_detuning(0.1);
        assert!(matches!(pseudo_potential(PhasePoint::new(0.0, 0.0), &fp), Err(Error::Unsupported(_))));
        let g = grid_export(&fp, &Grid::square(1.0, 3).unwrap()).unwrap();
        assert!(g.potential.is_none());
    }

    #[test]
    fn combined_perturbation_is_rejected() {
        let fp = FieldParams::new(1.0, 1.0).unwrap().with_loss(0.1).with_detuning(0.1);
        assert!(matches!(metastable_amplitude(&fp), Err(Error::Unsupported(_))));
        assert!(matches!(detuned_cut_potential(0.3, &fp), Err(Error::Unsupported(_))));
    }

    #[test]
    fn csv_layout() {
        let fp = FieldParams::new(1.0, 1.0).unwrap();
        let g = grid_export(&fp, &Grid::square(1.0, 2).unwrap()).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "x,y,vx,vy,speed,V");
        assert!(lines[1].starts_with("-1.0000000000000000e0,-1.0000000000000000e0,"));
        assert!(lines[2].starts_with("-1.0000000000000000e0,1.0000000000000000e0,"));
    }
}
