//! Gate heights: the quasipotential at the saddles bounding an attractor's
//! basin, the gate with the lowest height, and scans over the coupling for
//! the point where two gates exchange order.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::{
    equilibria_at, ContinuationSettings, Equilibrium, Stability, TrackedEquilibria,
};
use crate::error::{Error, Result};
use crate::model::{NetworkDrift, PlanarDrift};
use crate::qp::{sample_field_cubic, solve, Grid2D, QPField, SolverParams, StopRule};

/// Saddles closer than this to another equilibrium are too near a fold to read.
pub const FOLD_SEPARATION: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub beta: f64,
    pub anchor_label: String,
    /// Height per saddle label, `None` where the saddle lies outside the computed region.
    pub heights: BTreeMap<String, Option<f64>>,
    pub gate: String,
    pub gate_height: f64,
}

/// Reads the field at every saddle, bicubically, and picks the lowest. Ties go to the
/// lexicographically first label.
pub fn gate_heights(field: &QPField, saddles: &[Equilibrium]) -> Result<GateReport> {
    let mut heights = BTreeMap::new();
    for s in saddles {
        let p = s.xy();
        let h = if field.grid.contains(p) {
            sample_field_cubic(field, p)?
        } else {
            None
        };
        heights.insert(s.label().to_string(), h);
    }
    let (gate, gate_height) = heights
        .iter()
        .filter_map(|(l, h)| h.map(|h| (l.clone(), h)))
        .fold(None, |best: Option<(String, f64)>, (l, h)| match best {
            Some((_, b)) if b <= h => best,
            _ => Some((l, h)),
        })
        .ok_or(Error::NoGate)?;
    Ok(GateReport {
        beta: field.beta,
        anchor_label: field.anchor_label.clone().unwrap_or_default(),
        heights,
        gate,
        gate_height,
    })
}

/// Low-noise order of magnitude `exp(U*/sigma^2)` of the mean escape time,
/// without prefactor.
pub fn escape_time_estimate(gate_height: f64, sigma: f64) -> f64 {
    (gate_height / (sigma * sigma)).exp()
}

fn rk4(drift: &PlanarDrift, p: [f64; 2], dt: f64) -> [f64; 2] {
    let add = |a: [f64; 2], k: [f64; 2], s: f64| [a[0] + s * k[0], a[1] + s * k[1]];
    let k1 = drift.eval(p);
    let k2 = drift.eval(add(p, k1, 0.5 * dt));
    let k3 = drift.eval(add(p, k2, 0.5 * dt));
    let k4 = drift.eval(add(p, k3, dt));
    [
        p[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        p[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Where the two branches of a planar saddle's unstable manifold end up.
pub fn unstable_manifold_ends(drift: &PlanarDrift, saddle: [f64; 2]) -> [[f64; 2]; 2] {
    let j = drift.jacobian(saddle);
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let lam = 0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt());
    let (a, b) = ([j[0][1], lam - j[0][0]], [lam - j[1][1], j[1][0]]);
    let v = if a[0].hypot(a[1]) >= b[0].hypot(b[1]) {
        a
    } else {
        b
    };
    let norm = v[0].hypot(v[1]);
    let v = [v[0] / norm, v[1] / norm];
    [1.0, -1.0].map(|s| {
        let mut p = [saddle[0] + s * 1e-5 * v[0], saddle[1] + s * 1e-5 * v[1]];
        for _ in 0..200_000 {
            p = rk4(drift, p, 0.05);
            let f = drift.eval(p);
            if f[0].hypot(f[1]) < 1e-12
                || !p[0].is_finite()
                || p[0].abs() > 10.0
                || p[1].abs() > 10.0
            {
                break;
            }
        }
        p
    })
}

/// Saddles one of whose unstable branches flows into `anchor`.
pub fn basin_boundary_saddles(
    network: &NetworkDrift,
    anchor: [f64; 2],
    saddles: &[Equilibrium],
) -> Result<Vec<Equilibrium>> {
    let drift = network.planar().ok_or(Error::DimensionMismatch {
        expected: 2,
        got: network.dim(),
    })?;
    Ok(saddles
        .iter()
        .filter(|s| s.stability == Stability::Saddle)
        .filter(|s| {
            unstable_manifold_ends(&drift, s.xy())
                .iter()
                .any(|e| (e[0] - anchor[0]).hypot(e[1] - anchor[1]) < 1e-4)
        })
        .cloned()
        .collect())
}

/// Solves from the named attractor at `beta` and reports its gates.
pub fn analyse_gates(
    template: &NetworkDrift,
    beta: f64,
    anchor_label: &str,
    grid: &Grid2D,
    params: &SolverParams,
) -> Result<(QPField, GateReport)> {
    let tracked = equilibria_at(template, beta, &ContinuationSettings::default())?;
    let network = template.with_beta(beta)?;
    let anchor = tracked.get(anchor_label)?.xy();
    let saddles: Vec<Equilibrium> = tracked.saddles().cloned().collect();
    let boundary = basin_boundary_saddles(&network, anchor, &saddles)?;
    let mut field = solve(&network, grid, anchor, params)?;
    field.anchor_label = Some(anchor_label.to_string());
    let report = gate_heights(&field, &boundary)?;
    Ok((field, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub tol_beta: f64,
    /// Number of coarse samples across the range.
    pub coarse_samples: usize,
    /// Grid for the coarse pass; the bisection grid when `None`.
    pub coarse_grid: Option<Grid2D>,
    pub solver: SolverParams,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            tol_beta: 1e-3,
            coarse_samples: 6,
            coarse_grid: None,
            solver: SolverParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub report: GateReport,
    /// Height of the first participant minus the second, when both could be read.
    pub difference: Option<f64>,
    /// A participant was within the fold separation of another equilibrium.
    pub indeterminate: bool,
    pub grid_n: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateCrossing {
    pub beta: f64,
    pub bracket: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateScan {
    pub anchor_label: String,
    pub pair: (String, String),
    pub beta_range: (f64, f64),
    /// In order of evaluation: coarse pass first, then bisection.
    pub samples: Vec<ScanSample>,
    pub crossing: Option<GateCrossing>,
    pub warnings: Vec<String>,
    pub grid: Grid2D,
    pub settings: ScanSettings,
}

impl GateScan {
    /// Samples sorted by beta.
    pub fn sorted_samples(&self) -> Vec<&ScanSample> {
        let mut s: Vec<_> = self.samples.iter().collect();
        s.sort_by(|a, b| a.report.beta.total_cmp(&b.report.beta));
        s
    }
}

fn too_close_to_fold(tracked: &TrackedEquilibria, e: &Equilibrium) -> bool {
    tracked.equilibria.iter().any(|o| {
        o.label() != e.label()
            && o.position
                .iter()
                .zip(&e.position)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                < FOLD_SEPARATION
    })
}

fn scan_sample(
    template: &NetworkDrift,
    beta: f64,
    anchor_label: &str,
    pair: &(String, String),
    grid: &Grid2D,
    solver: &SolverParams,
) -> Result<ScanSample> {
    let tracked = equilibria_at(template, beta, &ContinuationSettings::default())?;
    let anchor = tracked.get(anchor_label)?.xy();
    let saddles = [tracked.get(&pair.0)?.clone(), tracked.get(&pair.1)?.clone()];
    let indeterminate = saddles.iter().any(|s| too_close_to_fold(&tracked, s));
    let mut params = solver.clone();
    params.stop = StopRule::TargetsAccepted(
        saddles
            .iter()
            .map(|s| s.xy())
            .filter(|p| grid.contains(*p))
            .collect(),
    );
    let network = template.with_beta(beta)?;
    let mut field = solve(&network, grid, anchor, &params)?;
    field.anchor_label = Some(anchor_label.to_string());
    let report = gate_heights(&field, &saddles)?;
    let difference = match (report.heights[&pair.0], report.heights[&pair.1]) {
        (Some(a), Some(b)) if !indeterminate => Some(a - b),
        _ => None,
    };
    Ok(ScanSample {
        report,
        difference,
        indeterminate,
        grid_n: (grid.nx, grid.ny),
    })
}

/// Locates the coupling at which the two saddles of `pair` exchange order
/// as gates of `anchor_label`: a coarse scan followed by bisection on the
/// sign of the height difference, each evaluation a fresh solve.
pub fn gate_bifurcation_scan(
    template: &NetworkDrift,
    beta_range: (f64, f64),
    anchor_label: &str,
    pair: (&str, &str),
    grid: &Grid2D,
    settings: &ScanSettings,
) -> Result<GateScan> {
    let (b0, mut b1) = beta_range;
    if !(b0 >= 0.0 && b1 > b0) || settings.tol_beta <= 0.0 || settings.coarse_samples < 2 {
        return Err(Error::InvalidConfig(format!(
            "invalid scan: range ({b0}, {b1}), tol {}, {} coarse samples",
            settings.tol_beta, settings.coarse_samples
        )));
    }
    let pair = (pair.0.to_string(), pair.1.to_string());
    let mut warnings = Vec::new();

    let end = equilibria_at(template, b1, &ContinuationSettings::default())?;
    for label in [anchor_label, pair.0.as_str(), pair.1.as_str()] {
        if let Err(Error::Eliminated { eliminated_at, .. }) = end.get(label) {
            if eliminated_at <= b0 {
                return Err(Error::Eliminated {
                    label: label.to_string(),
                    beta: b0,
                    eliminated_at,
                });
            }
            let cut = eliminated_at - 1e-6;
            if cut < b1 {
                warnings.push(format!(
                    "{label} disappears in a saddle-node at beta = {eliminated_at:.6}; range truncated"
                ));
                b1 = cut;
            }
        } else {
            end.get(label)?;
        }
    }

    let coarse_grid = settings.coarse_grid.unwrap_or(*grid);
    let n = settings.coarse_samples;
    let betas: Vec<f64> = (0..n)
        .map(|k| b0 + (b1 - b0) * k as f64 / (n - 1) as f64)
        .collect();
    let mut samples = betas
        .par_iter()
        .map(|&b| {
            scan_sample(
                template,
                b,
                anchor_label,
                &pair,
                &coarse_grid,
                &settings.solver,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    if samples.iter().any(|s| s.indeterminate) {
        warnings.push("samples near a saddle-node were marked indeterminate".into());
    }

    let mut crossing = None;
    let readable: Vec<(f64, f64)> = samples
        .iter()
        .filter_map(|s| s.difference.map(|d| (s.report.beta, d)))
        .collect();
    let bracket = readable
        .windows(2)
        .find(|w| w[0].1.signum() != w[1].1.signum())
        .map(|w| (w[0], w[1]));
    if let Some(((mut lo, dlo), (mut hi, _))) = bracket {
        let sign_lo = dlo.signum();
        let mut converged = true;
        while hi - lo > settings.tol_beta {
            let mid = 0.5 * (lo + hi);
            let s = scan_sample(template, mid, anchor_label, &pair, grid, &settings.solver)?;
            let d = s.difference;
            samples.push(s);
            match d {
                Some(d) if d.signum() == sign_lo => lo = mid,
                Some(_) => hi = mid,
                None => {
                    converged = false;
                    warnings.push(format!(
                        "bisection reached an unreadable sample at beta = {mid:.6}"
                    ));
                    break;
                }
            }
        }
        if converged {
            crossing = Some(GateCrossing {
                beta: 0.5 * (lo + hi),
                bracket: (lo, hi),
            });
        }
    }

    Ok(GateScan {
        anchor_label: anchor_label.to_string(),
        pair,
        beta_range: (b0, b1),
        samples,
        crossing,
        warnings,
        grid: *grid,
        settings: settings.clone(),
    })
}

/// Rows of `(beta, anchor, saddle, height, gate)`, one per saddle and report.
pub fn write_gate_reports_csv<W: Write>(out: W, reports: &[&GateReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beta", "anchor", "saddle", "height", "gate"])?;
    for r in reports {
        for (label, h) in &r.heights {
            w.write_record([
                format!("{:.10}", r.beta),
                r.anchor_label.clone(),
                label.clone(),
                h.map_or("unreachable".to_string(), |h| format!("{h:.10e}")),
                (*label == r.gate).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, Preset};
    use crate::qp::QS_WINDOW;
    use approx::assert_relative_eq;

    #[test]
    fn escape_time_examples() {
        assert_eq!(escape_time_estimate(0.0, 0.3), 1.0);
        assert_relative_eq!(
            escape_time_estimate(8.0 / 3.0 * 1e-3, 0.05),
            2.906,
            max_relative = 1e-3
        );
        let u = 0.004;
        let a = escape_time_estimate(u, 0.05).ln();
        let b = escape_time_estimate(u, 0.1).ln();
        assert_relative_eq!(b, a / 4.0, max_relative = 1e-12);
    }

    #[test]
    fn boundary_saddles_of_the_quiescent_state() {
        let t = Preset::TwoNode.build(ModelParams::baseline(0.0)).unwrap();
        let tracked = equilibria_at(&t, 0.1, &Default::default()).unwrap();
        let net = t.with_beta(0.1).unwrap();
        let qq = tracked.get("QQ").unwrap().xy();
        let saddles: Vec<_> = tracked.saddles().cloned().collect();
        let mut labels: Vec<String> = basin_boundary_saddles(&net, qq, &saddles)
            .unwrap()
            .iter()
            .map(|s| s.label().to_string())
            .collect();
        labels.sort();
        assert_eq!(labels, ["QS", "SQ"]);
    }

    #[test]
    fn symmetric_gates_at_zero_coupling() {
        let t = Preset::TwoNode.build(ModelParams::baseline(0.0)).unwrap();
        let grid = Grid2D::square(QS_WINDOW, 128).unwrap();
        let (_, r) = analyse_gates(&t, 0.0, "QQ", &grid, &SolverParams::default()).unwrap();
        let h: Vec<f64> = r.heights.values().map(|h| h.unwrap()).collect();
        assert_eq!(h.len(), 2);
        assert_relative_eq!(h[0], h[1], max_relative = 1e-6);
        assert_relative_eq!(r.gate_height, 8.0 / 3.0 * 1e-3, max_relative = 0.02);
        assert_eq!(r.gate, "QS");
    }

    #[test]
    fn unreachable_saddles_give_no_gate() {
        let t = Preset::TwoNode.build(ModelParams::baseline(0.0)).unwrap();
        let grid = Grid2D::square(QS_WINDOW, 64).unwrap();
        let params = SolverParams {
            k: 4,
            stop: StopRule::ValueCap(1e-4),
            ..Default::default()
        };
        let f = solve(&t, &grid, [-0.1, -0.1], &params).unwrap();
        let s = Equilibrium::at(&t, vec![0.1, -0.1]).with_label("SQ");
        assert!(matches!(gate_heights(&f, &[s]), Err(Error::NoGate)));
    }
}
