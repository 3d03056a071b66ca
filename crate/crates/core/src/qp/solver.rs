use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::action::{panel_action, segment_action};
use super::{Grid2D, PointStatus, QPField, Quadrature, SolverParams, StopRule};
use crate::error::{Error, Result};
use crate::model::{NetworkDrift, PlanarDrift};

/// Heap entry ordered so that the smallest value, then the smallest grid
/// index, comes out first.
#[derive(Clone, Copy, Debug)]
struct Entry {
    u: f64,
    idx: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.u.total_cmp(&self.u).then(other.idx.cmp(&self.idx))
    }
}

const NEIGHBOURS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

const GOLDEN: f64 = 0.618_033_988_749_894_9;

struct Solver<'a> {
    grid: &'a Grid2D,
    drift: PlanarDrift,
    quadrature: Quadrature,
    f: Vec<[f64; 2]>,
    u: Vec<f64>,
    status: Vec<PointStatus>,
    /// Number of in-grid 8-neighbours not yet accepted.
    open_neighbours: Vec<u8>,
    /// Update stencil: index offsets within the K*h disc.
    stencil: Vec<(isize, isize)>,
    heap: BinaryHeap<Entry>,
}

impl Solver<'_> {
    #[inline]
    fn shifted(&self, idx: usize, di: isize, dj: isize) -> Option<usize> {
        let (i, j) = self.grid.coords(idx);
        let (a, b) = (i as isize + di, j as isize + dj);
        (a >= 0 && b >= 0 && (a as usize) < self.grid.nx && (b as usize) < self.grid.ny)
            .then(|| self.grid.index(a as usize, b as usize))
    }

    #[inline]
    fn one_point(&self, from: usize, to: usize) -> f64 {
        let a = self.grid.point(from);
        let b = self.grid.point(to);
        self.u[from] + panel_action(&self.drift, a, b, self.f[from], self.f[to], self.quadrature)
    }

    /// Minimum over the front segment `[m, z]` of the linearly interpolated
    /// value plus the segment action to `to`. `None` when the minimum sits at
    /// the `m` end, which the one-point update already covers.
    fn triangle(&self, m: usize, z: usize, to: usize, at_m: f64) -> Option<f64> {
        let xm = self.grid.point(m);
        let xz = self.grid.point(z);
        let xt = self.grid.point(to);
        let ft = self.f[to];
        let (um, uz) = (self.u[m], self.u[z]);
        let eval = |lam: f64| {
            let p = [xm[0] + lam * (xz[0] - xm[0]), xm[1] + lam * (xz[1] - xm[1])];
            let fp = self.drift.eval(p);
            (1.0 - lam) * um + lam * uz + panel_action(&self.drift, p, xt, fp, ft, self.quadrature)
        };
        let eps = 1e-3;
        if eval(eps) >= at_m {
            return None;
        }
        let tol = 1e-2;
        let (mut a, mut b) = (0.0f64, 1.0f64);
        let mut c = b - GOLDEN * (b - a);
        let mut d = a + GOLDEN * (b - a);
        let (mut fc, mut fd) = (eval(c), eval(d));
        while b - a > tol {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - GOLDEN * (b - a);
                fc = eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + GOLDEN * (b - a);
                fd = eval(d);
            }
        }
        let best = fc.min(fd).min(eval(1.0));
        (best < at_m).then_some(best)
    }

    fn best_triangle(&self, m: usize, to: usize, at_m: f64) -> f64 {
        let mut best = at_m;
        for &(di, dj) in &NEIGHBOURS {
            if let Some(z) = self.shifted(m, di, dj) {
                if z != to && self.status[z] == PointStatus::Accepted {
                    if let Some(v) = self.triangle(m, z, to, best) {
                        best = v;
                    }
                }
            }
        }
        best
    }

    /// Value of a point entering the considered set, from every accepted
    /// front point within the stencil.
    fn full_update(&mut self, p: usize, floor: f64) {
        let mut best = f64::INFINITY;
        let mut from = None;
        for &(di, dj) in &self.stencil {
            if let Some(j) = self.shifted(p, di, dj) {
                if self.status[j] == PointStatus::Accepted && self.open_neighbours[j] > 0 {
                    let v = self.one_point(j, p);
                    if v < best {
                        best = v;
                        from = Some(j);
                    }
                }
            }
        }
        if let Some(m) = from {
            best = self.best_triangle(m, p, best).max(floor);
            if best < self.u[p] {
                self.u[p] = best;
                self.heap.push(Entry { u: best, idx: p });
            }
        }
    }

    /// Update of an already considered point after `x0` was accepted.
    fn incremental_update(&mut self, x0: usize, p: usize) {
        let v = self.one_point(x0, p);
        if v >= self.u[p] {
            return;
        }
        let best = self.best_triangle(x0, p, v).max(self.u[x0]);
        self.u[p] = best;
        self.heap.push(Entry { u: best, idx: p });
    }
}

fn check_anchor(drift: &PlanarDrift, grid: &Grid2D, anchor: [f64; 2]) -> Result<()> {
    if !grid.strictly_contains(anchor) {
        return Err(Error::OutsideGrid {
            x: anchor[0],
            y: anchor[1],
        });
    }
    let f = drift.eval(anchor);
    if f[0].hypot(f[1]) > 1e-8 {
        return Err(Error::InvalidConfig(format!(
            "anchor ({}, {}) is not an equilibrium (|f| = {:.3e})",
            anchor[0],
            anchor[1],
            f[0].hypot(f[1])
        )));
    }
    let j = drift.jacobian(anchor);
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if !(tr < 0.0 && det > 0.0) {
        let disc = tr * tr - 4.0 * det;
        let re = if disc >= 0.0 {
            vec![0.5 * (tr - disc.sqrt()), 0.5 * (tr + disc.sqrt())]
        } else {
            vec![0.5 * tr, 0.5 * tr]
        };
        return Err(Error::AnchorNotSink { re });
    }
    Ok(())
}

/// Computes the quasipotential relative to the sink `anchor`.
pub fn solve(
    network: &NetworkDrift,
    grid: &Grid2D,
    anchor: [f64; 2],
    params: &SolverParams,
) -> Result<QPField> {
    let drift = network.planar().ok_or(Error::DimensionMismatch {
        expected: 2,
        got: network.dim(),
    })?;
    params.validate(grid)?;
    check_anchor(&drift, grid, anchor)?;

    let n = grid.len();
    let (hx, hy, h) = (grid.hx(), grid.hy(), grid.h());
    let xs: Vec<f64> = (0..grid.nx).map(|i| grid.x(i)).collect();
    let mut f = vec![[0.0; 2]; n];
    for j in 0..grid.ny {
        drift.eval_row(&xs, grid.y(j), &mut f[j * grid.nx..(j + 1) * grid.nx]);
    }

    let reach = params.k as f64 * h;
    let (ki, kj) = ((reach / hx) as isize, (reach / hy) as isize);
    let mut stencil = Vec::new();
    for dj in -kj..=kj {
        for di in -ki..=ki {
            let (dx, dy) = (di as f64 * hx, dj as f64 * hy);
            if (di, dj) != (0, 0) && dx * dx + dy * dy <= reach * reach {
                stencil.push((di, dj));
            }
        }
    }

    let mut s = Solver {
        grid,
        drift,
        quadrature: params.quadrature,
        f,
        u: vec![f64::INFINITY; n],
        status: vec![PointStatus::Unknown; n],
        open_neighbours: vec![0; n],
        stencil,
        heap: BinaryHeap::new(),
    };
    for idx in 0..n {
        s.open_neighbours[idx] = NEIGHBOURS
            .iter()
            .filter(|&&(di, dj)| s.shifted(idx, di, dj).is_some())
            .count() as u8;
    }

    let radius = params.anchor_radius_cells * h;
    let lo_i = ((anchor[0] - radius - grid.x_range.0) / hx)
        .floor()
        .max(0.0) as usize;
    let hi_i = (((anchor[0] + radius - grid.x_range.0) / hx).ceil() as usize).min(grid.nx - 1);
    let lo_j = ((anchor[1] - radius - grid.y_range.0) / hy)
        .floor()
        .max(0.0) as usize;
    let hi_j = (((anchor[1] + radius - grid.y_range.0) / hy).ceil() as usize).min(grid.ny - 1);
    for j in lo_j..=hi_j {
        for i in lo_i..=hi_i {
            let idx = grid.index(i, j);
            let p = grid.point(idx);
            if (p[0] - anchor[0]).hypot(p[1] - anchor[1]) <= radius {
                let v = segment_action(&s.drift, anchor, p, params.quadrature, 4);
                s.u[idx] = v;
                s.status[idx] = PointStatus::Considered;
                s.heap.push(Entry { u: v, idx });
            }
        }
    }

    let mut targets = vec![false; n];
    let mut remaining_targets = 0usize;
    if let StopRule::TargetsAccepted(points) = &params.stop {
        for &p in points {
            let (i, j, _, _) = grid
                .cell_of(p)
                .ok_or(Error::OutsideGrid { x: p[0], y: p[1] })?;
            // The 4x4 block used by bicubic reads, clipped to the grid.
            let cols = i.saturating_sub(1)..=(i + 2).min(grid.nx - 1);
            let rows = j.saturating_sub(1)..=(j + 2).min(grid.ny - 1);
            for (a, b) in rows.flat_map(|b| cols.clone().map(move |a| (a, b))) {
                let k = grid.index(a, b);
                if !targets[k] {
                    targets[k] = true;
                    remaining_targets += 1;
                }
            }
        }
    }

    let mut audit = params.audit.then(Vec::new);
    let mut front_value = 0.0f64;
    while let Some(Entry { u, idx }) = s.heap.pop() {
        if s.status[idx] != PointStatus::Considered || u != s.u[idx] {
            continue;
        }
        if let StopRule::ValueCap(cap) = params.stop {
            if u > cap {
                break;
            }
        }
        debug_assert!(
            u >= front_value,
            "acceptance order violated: {u} < {front_value}"
        );
        front_value = u;
        s.status[idx] = PointStatus::Accepted;
        if let Some(a) = audit.as_mut() {
            a.push(u);
        }
        for &(di, dj) in &NEIGHBOURS {
            if let Some(nb) = s.shifted(idx, di, dj) {
                s.open_neighbours[nb] -= 1;
            }
        }
        if targets[idx] {
            remaining_targets -= 1;
            if remaining_targets == 0 {
                break;
            }
        }
        if params.stop == StopRule::OnBoundaryHit {
            let (i, j) = grid.coords(idx);
            if i == 0 || j == 0 || i == grid.nx - 1 || j == grid.ny - 1 {
                break;
            }
        }

        for k in 0..s.stencil.len() {
            let (di, dj) = s.stencil[k];
            if let Some(p) = s.shifted(idx, di, dj) {
                if s.status[p] == PointStatus::Considered {
                    s.incremental_update(idx, p);
                }
            }
        }
        for &(di, dj) in &NEIGHBOURS {
            if let Some(p) = s.shifted(idx, di, dj) {
                if s.status[p] == PointStatus::Unknown {
                    s.status[p] = PointStatus::Considered;
                    s.full_update(p, front_value);
                }
            }
        }
    }

    let mut values = s.u;
    let mut status = s.status;
    for (v, st) in values.iter_mut().zip(status.iter_mut()) {
        if *st != PointStatus::Accepted {
            *st = PointStatus::Unreachable;
            *v = f64::NAN;
        }
    }
    Ok(QPField {
        grid: *grid,
        values,
        status,
        anchor,
        anchor_label: None,
        beta: drift.beta,
        nu: drift.nu,
        anchor_radius: radius,
        audit,
    })
}
