//! Quasipotential of a planar drift relative to a sink, computed on a grid by
//! ordered front propagation over straight-segment geometric actions.
//!
//! The quasipotential `U(x)` is the least geometric action
//! `∫ (|ψ'| |f(ψ)| - ψ'·f(ψ)) ds` over paths from the anchor to `x`. It is
//! the viscosity solution of `|∇U|² + 2 f·∇U = 0` with `U(anchor) = 0`, and
//! for a gradient drift `f = -∇V` it reduces to `2 (V - V(anchor))` inside
//! the anchor's basin.

mod action;
mod contour;
mod field;
mod io;
mod solver;

pub use action::{action_of_path, geometric_action_segment, segment_action};
pub use contour::{extract_contours, write_contours_csv, Contour};
pub use field::{
    descend_path, hjb_residual, sample_field, sample_field_cubic, Descent, DescentParams,
};
pub use io::{read_field, write_field, MAGIC};
pub use solver::solve;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform rectangular grid, stored row-major with `x` varying fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl Grid2D {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        let g = Self {
            x_range,
            y_range,
            nx,
            ny,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn square(range: (f64, f64), n: usize) -> Result<Self> {
        Self::new(range, range, n, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 16 || self.ny < 16 {
            return Err(Error::InvalidConfig(format!(
                "grid {}x{} is below the 16x16 minimum",
                self.nx, self.ny
            )));
        }
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.1 > r.0;
        if !ok(self.x_range) || !ok(self.y_range) {
            return Err(Error::InvalidConfig(
                "grid ranges must be finite and increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        (self.x_range.1 - self.x_range.0) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_range.1 - self.y_range.0) / (self.ny - 1) as f64
    }

    /// The coarser of the two spacings.
    pub fn h(&self) -> f64 {
        self.hx().max(self.hy())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_range.0 + i as f64 * self.hx()
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y_range.0 + j as f64 * self.hy()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.coords(idx);
        [self.x(i), self.y(j)]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x_range.0
            && p[0] <= self.x_range.1
            && p[1] >= self.y_range.0
            && p[1] <= self.y_range.1
    }

    pub fn strictly_contains(&self, p: [f64; 2]) -> bool {
        p[0] > self.x_range.0
            && p[0] < self.x_range.1
            && p[1] > self.y_range.0
            && p[1] < self.y_range.1
    }

    /// Lower-left corner of the cell containing `p` and the local coordinates in it.
    pub fn cell_of(&self, p: [f64; 2]) -> Option<(usize, usize, f64, f64)> {
        if !self.contains(p) {
            return None;
        }
        let fx = (p[0] - self.x_range.0) / self.hx();
        let fy = (p[1] - self.y_range.0) / self.hy();
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        Some((i, j, fx - i as f64, fy - j as f64))
    }

    /// Grid node closest to `p`, if `p` lies in the grid.
    pub fn nearest(&self, p: [f64; 2]) -> Option<usize> {
        let (i, j, tx, ty) = self.cell_of(p)?;
        Some(self.index(i + (tx > 0.5) as usize, j + (ty > 0.5) as usize))
    }

    /// Same grid shifted by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x_range: (self.x_range.0 + dx, self.x_range.1 + dx),
            y_range: (self.y_range.0 + dy, self.y_range.1 + dy),
            ..*self
        }
    }
}

/// Window for anchors among the quiescent and saddle states.
pub const QS_WINDOW: (f64, f64) = (-0.45, 0.35);
/// Window used when active states are in view.
pub const FULL_WINDOW: (f64, f64) = (-0.45, 1.3);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    Midpoint,
    /// Simpson's rule on each segment.
    #[default]
    ThreePoint,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    #[default]
    WholeDomain,
    /// Stop as soon as a point on the grid boundary is accepted.
    OnBoundaryHit,
    /// Stop once the smallest tentative value exceeds the cap.
    ValueCap(f64),
    /// Stop once the 4x4 node blocks around all listed points are accepted.
    TargetsAccepted(Vec<[f64; 2]>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Update radius in grid cells.
    pub k: usize,
    pub quadrature: Quadrature,
    /// Radius of the disc initialised with exact actions from the anchor, in
    /// units of the grid spacing.
    pub anchor_radius_cells: f64,
    pub stop: StopRule,
    /// Keep the sequence of accepted values for auditing. Always on in debug builds.
    pub audit: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            k: 12,
            quadrature: Quadrature::ThreePoint,
            anchor_radius_cells: 6.0,
            stop: StopRule::WholeDomain,
            audit: cfg!(debug_assertions),
        }
    }
}

impl SolverParams {
    pub fn validate(&self, grid: &Grid2D) -> Result<()> {
        grid.validate()?;
        if self.k < 4 {
            return Err(Error::InvalidConfig(format!("K = {} is below 4", self.k)));
        }
        if self.anchor_radius_cells < 2.0 {
            return Err(Error::InvalidConfig(
                "anchor radius must be at least two grid spacings".into(),
            ));
        }
        let side = (grid.x_range.1 - grid.x_range.0).min(grid.y_range.1 - grid.y_range.0);
        if self.k as f64 * grid.h() > 0.25 * side {
            return Err(Error::InvalidConfig(format!(
                "grid {}x{} is too coarse for K = {}",
                grid.nx, grid.ny, self.k
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum PointStatus {
    Unknown = 0,
    Considered = 1,
    Accepted = 2,
    Unreachable = 3,
}

impl PointStatus {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Self::Unknown),
            1 => Some(Self::Considered),
            2 => Some(Self::Accepted),
            3 => Some(Self::Unreachable),
            _ => None,
        }
    }
}

/// Solved quasipotential. Unreachable points hold `NaN`.
#[derive(Clone, Debug, PartialEq)]
pub struct QPField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
    pub status: Vec<PointStatus>,
    pub anchor: [f64; 2],
    pub anchor_label: Option<String>,
    pub beta: f64,
    pub nu: f64,
    pub anchor_radius: f64,
    /// Accepted values in acceptance order, when auditing was enabled.
    pub audit: Option<Vec<f64>>,
}

impl QPField {
    pub fn value_at(&self, i: usize, j: usize) -> Option<f64> {
        let k = self.grid.index(i, j);
        (self.status[k] == PointStatus::Accepted).then_some(self.values[k])
    }

    pub fn accepted_count(&self) -> usize {
        self.status
            .iter()
            .filter(|s| **s == PointStatus::Accepted)
            .count()
    }

    /// Largest accepted value.
    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.status)
            .filter(|(_, s)| **s == PointStatus::Accepted)
            .fold(0.0f64, |m, (v, _)| m.max(*v))
    }
}

/// Polyline in the plane. Only its geometry matters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub vertices: Vec<[f64; 2]>,
}

impl Path {
    pub fn new(vertices: Vec<[f64; 2]>) -> Self {
        Self { vertices }
    }

    pub fn length(&self) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum()
    }
}
