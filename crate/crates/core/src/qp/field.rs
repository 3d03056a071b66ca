use serde::{Deserialize, Serialize};

use super::{Path, PointStatus, QPField};
use crate::error::{Error, Result};
use crate::model::NetworkDrift;

/// Bilinear interpolation of the field. `Ok(None)` when a contributing
/// corner is not accepted.
pub fn sample_field(field: &QPField, p: [f64; 2]) -> Result<Option<f64>> {
    let g = &field.grid;
    let (i, j, tx, ty) = g
        .cell_of(p)
        .ok_or(Error::OutsideGrid { x: p[0], y: p[1] })?;
    let corners = [
        (i, j, (1.0 - tx) * (1.0 - ty)),
        (i + 1, j, tx * (1.0 - ty)),
        (i, j + 1, (1.0 - tx) * ty),
        (i + 1, j + 1, tx * ty),
    ];
    let mut acc = 0.0;
    for (a, b, w) in corners {
        if w == 0.0 {
            continue;
        }
        match field.value_at(a, b) {
            Some(v) => acc += w * v,
            None => return Ok(None),
        }
    }
    Ok(Some(acc))
}

fn catmull_rom(p: [f64; 4], t: f64) -> f64 {
    0.5 * (2.0 * p[1]
        + (p[2] - p[0]) * t
        + (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * t * t
        + (3.0 * (p[1] - p[2]) + p[3] - p[0]) * t * t * t)
}

/// Bicubic (Catmull-Rom) interpolation over the surrounding 4x4 nodes.
/// Falls back to [`sample_field`] where that block is incomplete.
pub fn sample_field_cubic(field: &QPField, p: [f64; 2]) -> Result<Option<f64>> {
    let g = &field.grid;
    let (i, j, tx, ty) = g
        .cell_of(p)
        .ok_or(Error::OutsideGrid { x: p[0], y: p[1] })?;
    if i == 0 || j == 0 || i + 2 >= g.nx || j + 2 >= g.ny {
        return sample_field(field, p);
    }
    let mut rows = [0.0; 4];
    for (r, row) in rows.iter_mut().enumerate() {
        let mut v = [0.0; 4];
        for (c, vc) in v.iter_mut().enumerate() {
            match field.value_at(i + c - 1, j + r - 1) {
                Some(u) => *vc = u,
                None => return sample_field(field, p),
            }
        }
        *row = catmull_rom(v, tx);
    }
    Ok(Some(catmull_rom(rows, ty)))
}

/// Pointwise residual `|∇U|² + 2 f·∇U` from central differences, `NaN`
/// wherever the point or one of its four neighbours is not accepted.
pub fn hjb_residual(field: &QPField, network: &NetworkDrift) -> Result<Vec<f64>> {
    let drift = network.planar().ok_or(Error::DimensionMismatch {
        expected: 2,
        got: network.dim(),
    })?;
    let g = &field.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = vec![f64::NAN; g.len()];
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let c = g.index(i, j);
            let idx = [c, c - 1, c + 1, c - g.nx, c + g.nx];
            if idx
                .iter()
                .any(|&k| field.status[k] != PointStatus::Accepted)
            {
                continue;
            }
            let v = &field.values;
            let gx = (v[c + 1] - v[c - 1]) / (2.0 * hx);
            let gy = (v[c + g.nx] - v[c - g.nx]) / (2.0 * hy);
            let f = drift.eval(g.point(c));
            out[c] = gx * gx + gy * gy + 2.0 * (f[0] * gx + f[1] * gy);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentParams {
    /// Step length in grid spacings.
    pub step_cells: f64,
    /// Number of probe directions per step.
    pub directions: usize,
    /// Descent stops, flagged incomplete, once the best probe lowers `U`
    /// by less than this much per unit length.
    pub min_slope: f64,
    /// Zero means `4 (nx + ny)`.
    pub max_steps: usize,
}

impl Default for DescentParams {
    fn default() -> Self {
        Self {
            step_cells: 1.0,
            directions: 64,
            min_slope: 2e-5,
            max_steps: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descent {
    pub path: Path,
    /// Whether the anchor disc was reached.
    pub complete: bool,
}

/// Steepest descent of the interpolated field from `from` towards the anchor.
///
/// Each step probes a ring of directions and moves to the lowest probe, so
/// the walk also leaves points where `∇U` vanishes, such as saddles.
pub fn descend_path(field: &QPField, from: [f64; 2], params: &DescentParams) -> Result<Descent> {
    let mut u = sample_field(field, from)?.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "start ({}, {}) is not in the computed region",
            from[0], from[1]
        ))
    })?;
    let r = params.step_cells * field.grid.h();
    let max_steps = match params.max_steps {
        0 => 4 * (field.grid.nx + field.grid.ny),
        m => m,
    };
    let anchor = field.anchor;
    let mut p = from;
    let mut vertices = vec![from];
    for _ in 0..max_steps {
        if (p[0] - anchor[0]).hypot(p[1] - anchor[1]) <= field.anchor_radius {
            if p != anchor {
                vertices.push(anchor);
            }
            return Ok(Descent {
                path: Path::new(vertices),
                complete: true,
            });
        }
        let mut best: Option<([f64; 2], f64)> = None;
        for k in 0..params.directions {
            let th = std::f64::consts::TAU * k as f64 / params.directions as f64;
            let q = [p[0] + r * th.cos(), p[1] + r * th.sin()];
            if !field.grid.contains(q) {
                continue;
            }
            if let Some(v) = sample_field(field, q)? {
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((q, v));
                }
            }
        }
        match best {
            Some((q, v)) if (u - v) / r >= params.min_slope => {
                p = q;
                u = v;
                vertices.push(q);
            }
            _ => break,
        }
    }
    Ok(Descent {
        path: Path::new(vertices),
        complete: false,
    })
}
