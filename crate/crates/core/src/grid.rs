//! Rectangular phase-space sampling grids shared by the field and Wigner maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `nx × ny` samples spanning `[x_min, x_max] × [y_min, y_max]`, corners
/// included. Flattened row-major with `y` varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        let g = Self { x_min: x.0, x_max: x.1, y_min: y.0, y_max: y.1, nx, ny };
        g.validate()?;
        Ok(g)
    }

    /// `[-half, half]²` with `resolution` points per axis.
    pub fn square(half: f64, resolution: usize) -> Result<Self> {
        Self::new((-half, half), (-half, half), resolution, resolution)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidParameter("grid resolution must be at least 2".into()));
        }
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite());
        if !finite || !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return Err(Error::InvalidParameter("grid extents must be finite and increasing".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            self.y_max
        } else {
            self.y_min + j as f64 * self.dy()
        }
    }

    /// Coordinates of flat index `k`.
    pub fn point(&self, k: usize) -> (f64, f64) {
        (self.x(k / self.ny), self.y(k % self.ny))
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    /// True when the grid maps onto itself under (x, y) → (−x, −y) point by point.
    pub fn is_centered(&self) -> bool {
        let tol = 1e-12 * (self.x_max.abs() + self.y_max.abs()).max(1.0);
        (self.x_min + self.x_max).abs() < tol && (self.y_min + self.y_max).abs() < tol
    }
}
