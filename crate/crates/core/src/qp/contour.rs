use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{PointStatus, QPField};
use crate::error::Result;

/// Level set of a field as polylines. A closed polyline repeats its first vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub level: f64,
    pub polylines: Vec<Vec<[f64; 2]>>,
}

impl Contour {
    pub fn is_closed(line: &[[f64; 2]]) -> bool {
        line.len() > 2 && line.first() == line.last()
    }
}

/// Marching squares over cells whose four corners are accepted.
pub fn extract_contours(field: &QPField, levels: &[f64]) -> Vec<Contour> {
    levels.iter().map(|&l| contour_at(field, l)).collect()
}

fn contour_at(field: &QPField, level: f64) -> Contour {
    let g = &field.grid;
    let nx = g.nx;
    let v = &field.values;
    let ok = |k: usize| field.status[k] == PointStatus::Accepted;
    let point_on = |a: usize, b: usize| -> [f64; 2] {
        let (pa, pb) = (g.point(a), g.point(b));
        let t = ((level - v[a]) / (v[b] - v[a])).clamp(0.0, 1.0);
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    };

    // Edge ids: 2k for the edge k -> k+1, 2k+1 for k -> k+nx.
    let mut segments: Vec<[usize; 2]> = Vec::new();
    let mut points: HashMap<usize, [f64; 2]> = HashMap::new();
    for j in 0..g.ny - 1 {
        for i in 0..nx - 1 {
            let c = [
                j * nx + i,
                j * nx + i + 1,
                (j + 1) * nx + i + 1,
                (j + 1) * nx + i,
            ];
            if !c.iter().all(|&k| ok(k)) {
                continue;
            }
            let above = c.map(|k| v[k] > level);
            // Cell edges in cyclic order: bottom, right, top, left.
            let edges = [
                (2 * c[0], c[0], c[1]),
                (2 * c[1] + 1, c[1], c[2]),
                (2 * c[3], c[3], c[2]),
                (2 * c[0] + 1, c[0], c[3]),
            ];
            let sides = [(0, 1), (1, 2), (3, 2), (0, 3)];
            let mut crossing = Vec::with_capacity(4);
            for (e, &(a, b)) in edges.iter().zip(&sides) {
                if above[a] != above[b] {
                    crossing.push(e.0);
                    points.entry(e.0).or_insert_with(|| point_on(e.1, e.2));
                }
            }
            match crossing.len() {
                2 => segments.push([crossing[0], crossing[1]]),
                4 => {
                    let centre = 0.25 * c.iter().map(|&k| v[k]).sum::<f64>() > level;
                    let [b, r, t, l] = [crossing[0], crossing[1], crossing[2], crossing[3]];
                    if centre == above[0] {
                        segments.push([b, r]);
                        segments.push([t, l]);
                    } else {
                        segments.push([l, b]);
                        segments.push([r, t]);
                    }
                }
                _ => {}
            }
        }
    }

    let mut at_edge: HashMap<usize, Vec<usize>> = HashMap::new();
    for (s, seg) in segments.iter().enumerate() {
        for &e in seg {
            at_edge.entry(e).or_default().push(s);
        }
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();
    let walk = |start: usize, from_edge: usize, used: &mut Vec<bool>| {
        let mut line = vec![points[&from_edge]];
        let (mut s, mut e) = (start, from_edge);
        loop {
            used[s] = true;
            let next_edge = if segments[s][0] == e {
                segments[s][1]
            } else {
                segments[s][0]
            };
            line.push(points[&next_edge]);
            e = next_edge;
            match at_edge[&e].iter().find(|&&t| !used[t]) {
                Some(&t) => s = t,
                None => break,
            }
        }
        line
    };
    let mut open_ends: Vec<usize> = at_edge
        .iter()
        .filter(|(_, s)| s.len() == 1)
        .map(|(e, _)| *e)
        .collect();
    open_ends.sort_unstable();
    for e in open_ends {
        let s = at_edge[&e][0];
        if !used[s] {
            polylines.push(walk(s, e, &mut used));
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            polylines.push(walk(s, segments[s][0], &mut used));
        }
    }
    Contour { level, polylines }
}

/// Rows of `(level, polyline, x, y)`.
pub fn write_contours_csv<W: Write>(out: W, contours: &[Contour]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "polyline", "x", "y"])?;
    for c in contours {
        for (id, line) in c.polylines.iter().enumerate() {
            for p in line {
                w.write_record([
                    format!("{:.10e}", c.level),
                    id.to_string(),
                    format!("{:.10}", p[0]),
                    format!("{:.10}", p[1]),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
